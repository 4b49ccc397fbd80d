#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonlab/attacks.hpp"
#include "poisonlab/detector.hpp"
#include "poisonlab/envs.hpp"
#include "poisonlab/mdp.hpp"

namespace poisonlab {

enum class VictimAlgo { q_learning, dqn_lite };

VictimAlgo victim_algo_from_string(const std::string& name);
std::string victim_algo_to_string(VictimAlgo algo);

struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    int64_t decay_steps = 1;

    double at(int64_t step) const {
        if (step >= decay_steps) return end;
        return start + (end - start) * static_cast<double>(step) / static_cast<double>(decay_steps);
    }
};

struct VictimConfig {
    VictimAlgo algo = VictimAlgo::q_learning;
    double learning_rate = 0.2;
    EpsilonSchedule epsilon;
    int64_t total_steps = 10000;
    int eval_episodes = 100;
    uint64_t seed = 1;

    // dqn_lite only
    int replay_capacity = 100000;
    int batch_size = 32;
    int train_period = 4;
    int warmup_steps = 500;

    void validate() const;
};

/// What the learner is allowed to see of a stored transition: no attacker
/// bookkeeping fields.
struct VictimView {
    int state;
    int action;
    double reward;
    int next_state;
    bool terminal;
};

inline VictimView victim_view(const Transition& t) {
    return VictimView{t.state, t.action, t.reward, t.next_state, t.terminal};
}

/// Victim Q-table spanning benign states plus triggered copies. A triggered
/// pair that has never received its own update reads through to the benign
/// entry, standing in for a function approximator generalizing across the
/// trigger; the first update specializes it.
class VictimQTable {
public:
    VictimQTable(int n_benign, int n_actions);

    double value(int x, int a) const;
    double max_value(int x) const;
    int greedy_action(int x) const;  // ties toward the lowest action index

    void update(const VictimView& view, double lr, double gamma);

    int n_states() const { return 2 * n_benign_; }
    int n_benign() const { return n_benign_; }
    int n_actions() const { return n_actions_; }

    /// Greedy policy over benign states plus triggered copies.
    TabularPolicy greedy_policy() const;
    /// Greedy policy over benign states only.
    TabularPolicy greedy_benign_policy() const;

private:
    int n_benign_;
    int n_actions_;
    Matrix table_;
    std::vector<uint8_t> seen_;
};

struct CheckpointRow {
    int checkpoint = 0;
    int64_t env_steps = 0;
    double asr = 0.0;
    double br = 0.0;
    int64_t poisoned_steps = 0;
    double actions_changed_ratio = 0.0;
    int64_t detector_flags = 0;
};

struct RunReport {
    std::string run_id;
    uint64_t seed = 0;
    AttackKind attack_kind = AttackKind::none;
    double beta = 0.0;
    std::vector<CheckpointRow> rows;

    const CheckpointRow& final_row() const { return rows.back(); }
};

/// Trains a victim on the environment while the attack edits its stored
/// experience, either per completed episode (q_learning) or at replay
/// sampling time (dqn_lite). Deterministic given the victim seed.
std::pair<TabularPolicy, RunReport> train_poisoned(const Environment& env, const VictimConfig& victim,
                                                   const AttackConfig& attack, int checkpoints = 10);

/// Triggered rollouts: the trigger is applied to every observation and the
/// rollout acts greedily on the triggered view. Returns the fraction of
/// steps choosing the target action.
double evaluate_asr(const Environment& env, const TabularPolicy& policy, const Trigger& trigger,
                    int target, int episodes, uint64_t seed);

/// Clean rollouts sampling the policy; mean undiscounted episodic return.
double evaluate_br(const Environment& env, const TabularPolicy& policy, int episodes, uint64_t seed);

}  // namespace poisonlab
