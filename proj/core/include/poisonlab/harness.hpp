#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonlab/attacks.hpp"
#include "poisonlab/victims.hpp"

namespace poisonlab {

struct RunConfig {
    std::string environment = "counterexample";
    double gamma = 0.9;
    int checkpoints = 10;
    std::string output_path = "report.csv";
    std::vector<uint64_t> seeds;
    VictimConfig victim;
    AttackConfig attack;

    void validate() const;
};

RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);

std::string make_run_id(const RunConfig& cfg);

/// One training run per seed plus an aggregate row (mean and standard
/// deviation of the final ASR/BR). Writes the CSV to cfg.output_path.
std::vector<RunReport> run_experiment(const RunConfig& cfg);

/// CSV with the stable column set
/// run_id,seed,checkpoint,env_steps,asr,br,poisoned_steps,actions_changed_ratio,detector_flags,attack_kind,beta
/// followed by one aggregate row (asr/br as "mean±std", "NA" when undefined).
std::string reports_to_csv(const std::vector<RunReport>& reports);

struct PropertyResult {
    std::string name;
    bool passed = true;
    double worst_margin = 0.0;  // pass iff worst_margin >= -tolerance
    double tolerance = 0.0;
    std::string note;
    std::string failing_instance_json;  // first failing instance, replayable
};

struct VerificationReport {
    int instances = 0;
    uint64_t seed = 0;
    std::vector<PropertyResult> properties;

    bool passed() const;
    std::string to_json() const;
    std::string summary_lines() const;
};

/// Exact dynamic-programming checks of the adversarial construction over
/// randomized instances: target-action optimality at every triggered copy,
/// value dominance and preservation on benign states, optimality
/// equivalence, transition-split marginalization, forced-override
/// invariance, and the fixed counterexample values.
VerificationReport run_verification_suite(int n_instances, uint64_t seed);

/// Re-runs the named property on a serialized instance; returns its margin.
double replay_instance(const std::string& instance_json);

}  // namespace poisonlab
