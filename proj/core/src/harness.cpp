#include "poisonlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "poisonlab/json_io.hpp"

namespace poisonlab {

using nlohmann::json;

void RunConfig::validate() const {
    if (seeds.empty()) throw ConfigError("run config needs at least one seed");
    if (checkpoints < 1) throw ConfigError("run config needs at least one checkpoint");
    victim.validate();
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad run config JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        cfg.environment = j.value("environment", cfg.environment);
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.checkpoints = j.value("checkpoints", cfg.checkpoints);
        cfg.output_path = j.value("output", cfg.output_path);
        cfg.seeds = j.value("seeds", std::vector<uint64_t>{1});

        if (j.contains("victim")) {
            const json& v = j["victim"];
            cfg.victim.algo = victim_algo_from_string(v.value("algo", std::string("q_learning")));
            cfg.victim.learning_rate = v.value("learning_rate", cfg.victim.learning_rate);
            cfg.victim.epsilon.start = v.value("epsilon_start", cfg.victim.epsilon.start);
            cfg.victim.epsilon.end = v.value("epsilon_end", cfg.victim.epsilon.end);
            cfg.victim.epsilon.decay_steps = v.value("epsilon_decay_steps", cfg.victim.epsilon.decay_steps);
            cfg.victim.total_steps = v.value("total_steps", cfg.victim.total_steps);
            cfg.victim.eval_episodes = v.value("eval_episodes", cfg.victim.eval_episodes);
            cfg.victim.replay_capacity = v.value("replay_capacity", cfg.victim.replay_capacity);
            cfg.victim.batch_size = v.value("batch_size", cfg.victim.batch_size);
            cfg.victim.train_period = v.value("train_period", cfg.victim.train_period);
            cfg.victim.warmup_steps = v.value("warmup_steps", cfg.victim.warmup_steps);
        }
        if (j.contains("attack")) {
            const json& a = j["attack"];
            cfg.attack.kind = attack_kind_from_string(a.value("kind", std::string("none")));
            cfg.attack.beta = a.value("beta", cfg.attack.beta);
            cfg.attack.target_action = a.value("target_action", cfg.attack.target_action);
            cfg.attack.static_c = a.value("static_c", cfg.attack.static_c);
            cfg.attack.forced_rho = a.value("forced_rho", cfg.attack.forced_rho);
            cfg.attack.constrain = a.value("constrain", cfg.attack.constrain);
            cfg.attack.start_poison_fraction = a.value("start_poison_fraction", cfg.attack.start_poison_fraction);
            cfg.attack.oracle_qhat = a.value("oracle_qhat", cfg.attack.oracle_qhat);
            cfg.attack.oracle_budget_steps = a.value("oracle_budget_steps", cfg.attack.oracle_budget_steps);
            const std::string metric = a.value("metric", std::string("advantage"));
            if (metric == "advantage") {
                cfg.attack.metric = FMetricMode::advantage;
            } else if (metric == "td") {
                cfg.attack.metric = FMetricMode::td;
            } else {
                throw ConfigError("attack metric must be 'advantage' or 'td'");
            }
            cfg.attack.qhat.learning_rate = a.value("qhat_learning_rate", cfg.attack.qhat.learning_rate);
            cfg.attack.qhat.update_period = a.value("qhat_update_period", cfg.attack.qhat.update_period);
            cfg.attack.qhat.batch_size = a.value("qhat_batch_size", cfg.attack.qhat.batch_size);
            cfg.attack.qhat.replay_capacity = a.value("qhat_replay_capacity", cfg.attack.qhat.replay_capacity);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad run config field: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["environment"] = cfg.environment;
    j["gamma"] = cfg.gamma;
    j["checkpoints"] = cfg.checkpoints;
    j["output"] = cfg.output_path;
    j["seeds"] = cfg.seeds;
    j["victim"] = {{"algo", victim_algo_to_string(cfg.victim.algo)},
                   {"learning_rate", cfg.victim.learning_rate},
                   {"epsilon_start", cfg.victim.epsilon.start},
                   {"epsilon_end", cfg.victim.epsilon.end},
                   {"epsilon_decay_steps", cfg.victim.epsilon.decay_steps},
                   {"total_steps", cfg.victim.total_steps},
                   {"eval_episodes", cfg.victim.eval_episodes}};
    j["attack"] = {{"kind", attack_kind_to_string(cfg.attack.kind)},
                   {"beta", cfg.attack.beta},
                   {"target_action", cfg.attack.target_action},
                   {"static_c", cfg.attack.static_c},
                   {"forced_rho", cfg.attack.forced_rho},
                   {"constrain", cfg.attack.constrain},
                   {"start_poison_fraction", cfg.attack.start_poison_fraction},
                   {"oracle_qhat", cfg.attack.oracle_qhat},
                   {"metric", cfg.attack.metric == FMetricMode::advantage ? "advantage" : "td"},
                   {"qhat_learning_rate", cfg.attack.qhat.learning_rate},
                   {"qhat_update_period", cfg.attack.qhat.update_period},
                   {"qhat_batch_size", cfg.attack.qhat.batch_size},
                   {"qhat_replay_capacity", cfg.attack.qhat.replay_capacity}};
    return j.dump(2);
}

std::string make_run_id(const RunConfig& cfg) {
    std::string env = cfg.environment;
    std::replace(env.begin(), env.end(), ':', '-');
    char beta[32];
    std::snprintf(beta, sizeof(beta), "%.6g", cfg.attack.beta);
    return env + "_" + attack_kind_to_string(cfg.attack.kind) + "_b" + beta;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string reports_to_csv(const std::vector<RunReport>& reports) {
    std::ostringstream out;
    out << "run_id,seed,checkpoint,env_steps,asr,br,poisoned_steps,actions_changed_ratio,"
           "detector_flags,attack_kind,beta\n";
    for (const RunReport& r : reports) {
        for (const CheckpointRow& row : r.rows) {
            out << r.run_id << ',' << r.seed << ',' << row.checkpoint << ',' << row.env_steps << ','
                << (std::isnan(row.asr) ? "NA" : fmt(row.asr)) << ',' << fmt(row.br) << ','
                << row.poisoned_steps << ',' << fmt(row.actions_changed_ratio) << ',' << row.detector_flags
                << ',' << attack_kind_to_string(r.attack_kind) << ',' << fmt_g(r.beta) << '\n';
        }
    }
    if (!reports.empty()) {
        const RunReport& first = reports.front();
        double asr_mean = 0.0, asr_sq = 0.0, br_mean = 0.0, br_sq = 0.0;
        double poisoned_mean = 0.0, ratio_mean = 0.0, flags_mean = 0.0;
        int64_t steps_mean = 0;
        bool asr_defined = true;
        const double nruns = static_cast<double>(reports.size());
        for (const RunReport& r : reports) {
            const CheckpointRow& f = r.final_row();
            if (std::isnan(f.asr)) asr_defined = false;
            asr_mean += std::isnan(f.asr) ? 0.0 : f.asr;
            asr_sq += std::isnan(f.asr) ? 0.0 : f.asr * f.asr;
            br_mean += f.br;
            br_sq += f.br * f.br;
            poisoned_mean += static_cast<double>(f.poisoned_steps);
            ratio_mean += f.actions_changed_ratio;
            flags_mean += static_cast<double>(f.detector_flags);
            steps_mean += f.env_steps;
        }
        asr_mean /= nruns;
        br_mean /= nruns;
        poisoned_mean /= nruns;
        ratio_mean /= nruns;
        flags_mean /= nruns;
        auto sample_std = [&](double mean, double sq) {
            if (reports.size() < 2) return 0.0;
            const double var = (sq - nruns * mean * mean) / (nruns - 1.0);
            return std::sqrt(std::max(0.0, var));
        };
        out << first.run_id << ",aggregate," << first.rows.back().checkpoint << ','
            << steps_mean / static_cast<int64_t>(reports.size()) << ',';
        if (asr_defined) {
            out << fmt(asr_mean) << "\xC2\xB1" << fmt(sample_std(asr_mean, asr_sq));
        } else {
            out << "NA";
        }
        out << ',' << fmt(br_mean) << "\xC2\xB1" << fmt(sample_std(br_mean, br_sq)) << ','
            << fmt(poisoned_mean) << ',' << fmt(ratio_mean) << ',' << fmt(flags_mean) << ','
            << attack_kind_to_string(first.attack_kind) << ',' << fmt_g(first.beta) << '\n';
    }
    return out.str();
}

std::vector<RunReport> run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const std::string run_id = make_run_id(cfg);
    std::vector<RunReport> reports;
    reports.reserve(cfg.seeds.size());
    for (uint64_t seed : cfg.seeds) {
        Environment env = make_environment(cfg.environment, cfg.gamma);
        VictimConfig victim = cfg.victim;
        victim.seed = seed;
        auto [policy, report] = train_poisoned(env, victim, cfg.attack, cfg.checkpoints);
        report.run_id = run_id;
        reports.push_back(std::move(report));
    }
    write_text_file(cfg.output_path, reports_to_csv(reports));
    return reports;
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

namespace {

TabularPolicy random_trigger_blind_policy(int n, int na, Rng& rng) {
    Matrix rows(2 * n, na, 0.0);
    for (int s = 0; s < n; ++s) {
        double z = 0.0;
        std::vector<double> w(na);
        for (int a = 0; a < na; ++a) {
            double u = rng.next_double();
            if (u <= 0.0) u = 1e-300;
            w[a] = -std::log(u);
            z += w[a];
        }
        for (int a = 0; a < na; ++a) {
            rows.at(s, a) = w[a] / z;
            rows.at(s + n, a) = w[a] / z;
        }
    }
    return TabularPolicy(std::move(rows));
}

TabularPolicy extend_trigger_blind(const TabularPolicy& benign) {
    const int n = benign.n_states();
    const int na = benign.n_actions();
    Matrix rows(2 * n, na, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) {
            rows.at(s, a) = benign.prob(s, a);
            rows.at(s + n, a) = benign.prob(s, a);
        }
    }
    return TabularPolicy(std::move(rows));
}

TabularPolicy extend_with_target(const TabularPolicy& benign, int target) {
    const int n = benign.n_states();
    const int na = benign.n_actions();
    Matrix rows(2 * n, na, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) rows.at(s, a) = benign.prob(s, a);
        rows.at(s + n, target) = 1.0;
    }
    return TabularPolicy(std::move(rows));
}

TabularPolicy restrict_benign(const TabularPolicy& pol, int n) {
    Matrix rows(n, pol.n_actions(), 0.0);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < pol.n_actions(); ++a) rows.at(s, a) = pol.prob(s, a);
    return TabularPolicy(std::move(rows));
}

// Value of `pol` at benign state s, slice j, from an augmented Q.
double benign_value(const QTable& q, const AugmentedLayout& layout, const TabularPolicy& pol, int s, int j) {
    double acc = 0.0;
    for (int a = 0; a < q.n_actions(); ++a) acc += pol.prob(s, a) * q.at(layout.index(s, j), a);
    return acc;
}

double margin_target_optimality(const AdversarialSpec& spec, const TabularPolicy& pol) {
    const AugmentedLayout layout = make_layout(spec);
    QTable q = evaluate_policy_adversarial(spec, pol);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < layout.n_base; ++s) {
        for (int j = 0; j < layout.n_slices(); ++j) {
            const int u = layout.index(spec.trigger.poisoned(s), j);
            double best_other = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < q.n_actions(); ++a) {
                if (a == spec.target_action) continue;
                best_other = std::max(best_other, q.at(u, a));
            }
            worst = std::min(worst, q.at(u, spec.target_action) - best_other);
        }
    }
    return worst;
}

double margin_value_dominance(const AdversarialSpec& spec, const TabularPolicy& pol) {
    const AugmentedLayout layout = make_layout(spec);
    QTable q = evaluate_policy_adversarial(spec, pol);
    ValueTable v_m = policy_evaluation(spec.base, restrict_benign(pol, layout.n_base));
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < layout.n_base; ++s) {
        for (int j = 0; j < layout.n_slices(); ++j) {
            worst = std::min(worst, benign_value(q, layout, pol, s, j) - v_m[s]);
        }
    }
    return worst;
}

double margin_zero_rate_reduction(const AdversarialSpec& spec, const TabularPolicy& pol) {
    AdversarialSpec zero(spec.base, 0.0, spec.target_action, spec.tau_mode, spec.initial_prev_reward);
    const AugmentedLayout layout = make_layout(zero);
    QTable q = evaluate_policy_adversarial(zero, pol);
    ValueTable v_m = policy_evaluation(zero.base, restrict_benign(pol, layout.n_base));
    double gap = 0.0;
    for (int s = 0; s < layout.n_base; ++s) {
        for (int j = 0; j < layout.n_slices(); ++j) {
            gap = std::max(gap, std::abs(benign_value(q, layout, pol, s, j) - v_m[s]));
        }
    }
    return -gap;
}

double margin_optimal_value_preservation(const AdversarialSpec& spec) {
    const AugmentedLayout layout = make_layout(spec);
    auto [q_star, pi_star] = optimal_policy_adversarial(spec);
    ValueTable v_m = policy_evaluation(spec.base, restrict_benign(pi_star, layout.n_base));
    double gap = 0.0;
    for (int s = 0; s < layout.n_base; ++s) {
        for (int j = 0; j < layout.n_slices(); ++j) {
            double v_prime = -std::numeric_limits<double>::infinity();
            const int u = layout.index(s, j);
            for (int a = 0; a < q_star.n_actions(); ++a) v_prime = std::max(v_prime, q_star.at(u, a));
            gap = std::max(gap, std::abs(v_prime - v_m[s]));
        }
    }
    return -gap;
}

double margin_optimality_equivalence(const AdversarialSpec& spec) {
    const AugmentedLayout layout = make_layout(spec);
    const int n = layout.n_base;

    auto [v_star_m, pi_star_m] = value_iteration(spec.base);
    auto [q_star, pi_star] = optimal_policy_adversarial(spec);

    // Forward: the benign-optimal policy, applied trigger-blind, matches the
    // optimal adversarial value on benign states.
    QTable q_fwd = evaluate_policy_adversarial(spec, extend_trigger_blind(pi_star_m));
    double gap = 0.0;
    for (int s = 0; s < n; ++s) {
        for (int j = 0; j < layout.n_slices(); ++j) {
            const int u = layout.index(s, j);
            double v_fwd = 0.0;
            for (int a = 0; a < q_fwd.n_actions(); ++a) v_fwd += pi_star_m.prob(s, a) * q_fwd.at(u, a);
            double v_opt = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < q_star.n_actions(); ++a) v_opt = std::max(v_opt, q_star.at(u, a));
            gap = std::max(gap, std::abs(v_fwd - v_opt));
        }
    }

    // Backward: the adversarially optimal policy is benign-optimal.
    ValueTable v_back = policy_evaluation(spec.base, restrict_benign(pi_star, n));
    for (int s = 0; s < n; ++s) gap = std::max(gap, std::abs(v_back[s] - v_star_m[s]));
    return -gap;
}

double margin_marginalization(const AdversarialSpec& spec, const TabularPolicy& pol) {
    AugmentedMDP aug = build_adversarial_mdp(spec, pol);
    const AugmentedLayout& layout = aug.layout;
    const int n = layout.n_base;
    double worst = 0.0;
    for (int s = 0; s < n; ++s) {
        for (int j = 0; j < layout.n_slices(); ++j) {
            const int u = layout.index(s, j);
            for (int a = 0; a < aug.mdp.n_actions(); ++a) {
                for (int s2 = 0; s2 < n; ++s2) {
                    double mass = 0.0;
                    for (int j2 = 0; j2 < layout.n_slices(); ++j2) {
                        mass += aug.mdp.transition(u, a, layout.index(s2, j2));
                        mass += aug.mdp.transition(u, a, layout.index(spec.trigger.poisoned(s2), j2));
                    }
                    worst = std::max(worst, std::abs(mass - spec.base.transition(s, a, s2)));
                }
            }
        }
    }
    return -worst;
}

struct CounterexampleEval {
    AugmentedLayout layout;
    QTable q;
    int u_hi;  // triggered start, previous reward at the upper bound
};

CounterexampleEval eval_counterexample(double gamma, double beta, bool inception, double rho,
                                       bool uniform_policy) {
    Environment env = make_counterexample(gamma);
    AdversarialSpec spec(env.mdp, beta, kCounterexampleTargetAction, TauMode::clamped, 1.0);
    AugmentedLayout layout = make_layout(spec);
    TabularPolicy pol = uniform_policy
                            ? TabularPolicy::uniform(spec.trigger.total_states(), env.mdp.n_actions())
                            : extend_with_target(value_iteration(env.mdp).second, spec.target_action);
    AdversarialEvalOptions opts;
    opts.inception = inception;
    opts.forced_rho = rho;
    QTable q = evaluate_policy_adversarial(spec, pol, 1e-12, opts);
    const int u_hi = layout.index(spec.trigger.poisoned(kCounterexampleStart), layout.slice_for(1.0));
    return CounterexampleEval{layout, std::move(q), u_hi};
}

double margin_nullity(double gamma) {
    double worst = 0.0;
    for (bool uniform : {true, false}) {
        CounterexampleEval base = eval_counterexample(gamma, 0.1, false, 0.0, uniform);
        for (double rho : {0.5, 1.0}) {
            CounterexampleEval mixed = eval_counterexample(gamma, 0.1, false, rho, uniform);
            for (int j = 0; j < base.layout.n_slices(); ++j) {
                const int u = base.layout.index(base.layout.n_base + kCounterexampleStart, j);
                for (int a = 0; a < base.q.n_actions(); ++a) {
                    worst = std::max(worst, std::abs(base.q.at(u, a) - mixed.q.at(u, a)));
                }
            }
        }
    }
    return -worst;
}

double margin_golden_no_inception(double gamma) {
    CounterexampleEval e = eval_counterexample(gamma, 0.1, false, 0.0, false);
    const double future = gamma / (1.0 - gamma);
    double gap = std::abs(e.q.at(e.u_hi, kCounterexampleTargetAction) - 1.0);
    gap = std::max(gap, std::abs(e.q.at(e.u_hi, kCounterexampleProsperAction) - future));
    return -gap;
}

double margin_golden_inception(double gamma) {
    Environment env = make_counterexample(gamma);
    AdversarialSpec spec(env.mdp, 0.1, kCounterexampleTargetAction, TauMode::clamped, 1.0);
    AugmentedLayout layout = make_layout(spec);
    auto [q_opt, pi_opt] = optimal_policy_adversarial(spec);
    QTable q = evaluate_policy_adversarial(spec, pi_opt, 1e-12);
    const int u_hi = layout.index(spec.trigger.poisoned(kCounterexampleStart), layout.slice_for(1.0));
    const double future = gamma / (1.0 - gamma);
    double gap = std::abs(q.at(u_hi, kCounterexampleTargetAction) - (1.0 + future));
    gap = std::max(gap, std::abs(q.at(u_hi, kCounterexampleProsperAction) - future));
    return -gap;
}

struct InstanceParams {
    int n_states;
    int n_actions;
    double gamma;
    double beta;
    int target;
    uint64_t seed;
};

InstanceParams instance_params(int i, uint64_t seed) {
    const double gammas[3] = {0.5, 0.9, 0.99};
    const double betas[4] = {0.05, 0.1, 0.25, 0.5};
    Rng rng(mix_seed(seed, 0x1000 + static_cast<uint64_t>(i)));
    InstanceParams p;
    p.n_states = 2 + rng.next_index(5);
    p.n_actions = 2 + rng.next_index(3);
    p.gamma = gammas[i % 3];
    p.beta = betas[i % 4];
    p.target = rng.next_index(p.n_actions);
    p.seed = rng.next_u64();
    return p;
}

std::string instance_to_json(const std::string& property, const AdversarialSpec& spec,
                             const TabularPolicy* pol) {
    json j;
    j["property"] = property;
    j["mdp"] = json::parse(mdp_to_json(spec.base));
    j["beta"] = spec.beta;
    j["target_action"] = spec.target_action;
    j["tau_mode"] = spec.tau_mode == TauMode::clamped ? "clamped" : "theoretical";
    j["initial_prev_reward"] = spec.initial_prev_reward;
    if (pol != nullptr) j["policy"] = json::parse(policy_to_json(*pol));
    return j.dump();
}

}  // namespace

bool VerificationReport::passed() const {
    for (const PropertyResult& p : properties) {
        if (!p.passed) return false;
    }
    return true;
}

std::string VerificationReport::to_json() const {
    json j;
    j["instances"] = instances;
    j["seed"] = seed;
    json props = json::array();
    for (const PropertyResult& p : properties) {
        json pj;
        pj["name"] = p.name;
        pj["passed"] = p.passed;
        pj["worst_margin"] = p.worst_margin;
        pj["tolerance"] = p.tolerance;
        pj["note"] = p.note;
        if (!p.failing_instance_json.empty()) pj["failing_instance"] = json::parse(p.failing_instance_json);
        props.push_back(std::move(pj));
    }
    j["properties"] = std::move(props);
    j["passed"] = passed();
    return j.dump(2);
}

std::string VerificationReport::summary_lines() const {
    std::ostringstream out;
    for (const PropertyResult& p : properties) {
        out << (p.passed ? "[PASS] " : "[FAIL] ") << p.name << " worst_margin=";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3e", p.worst_margin);
        out << buf << " tolerance=";
        std::snprintf(buf, sizeof(buf), "%.0e", p.tolerance);
        out << buf;
        if (!p.note.empty()) out << "  (" << p.note << ")";
        out << '\n';
    }
    return out.str();
}

VerificationReport run_verification_suite(int n_instances, uint64_t seed) {
    if (n_instances < 1) throw DomainError("run_verification_suite: need at least one instance");

    VerificationReport report;
    report.instances = n_instances;
    report.seed = seed;

    PropertyResult target_opt{"target_action_optimality", true,
                              std::numeric_limits<double>::infinity(), 1e-8,
                              "target action is greedy at every triggered copy and slice", ""};
    PropertyResult dominance{"benign_value_dominance", true, std::numeric_limits<double>::infinity(),
                             1e-8, "adversarial value dominates the benign value on benign states", ""};
    PropertyResult zero_rate{"zero_rate_reduction", true, std::numeric_limits<double>::infinity(), 1e-8,
                             "zero-rate evaluation matches the benign evaluation", ""};
    PropertyResult preservation{"optimal_value_preservation", true,
                                std::numeric_limits<double>::infinity(), 1e-6,
                                "optimal adversarial value equals its benign value", ""};
    PropertyResult equivalence{"optimality_equivalence", true, std::numeric_limits<double>::infinity(),
                               1e-6,
                               "benign-optimal and adversarially optimal policies coincide on benign states",
                               ""};
    PropertyResult marginal{"transition_split_marginalization", true,
                            std::numeric_limits<double>::infinity(), 1e-12,
                            "benign/triggered split recombines to the base transitions", ""};

    constexpr int kPoliciesPerInstance = 10;
    for (int i = 0; i < n_instances; ++i) {
        const InstanceParams p = instance_params(i, seed);
        Environment env = make_random_mdp(p.n_states, p.n_actions, p.gamma, p.seed);
        AdversarialSpec spec(env.mdp, p.beta, p.target, TauMode::theoretical);
        Rng pol_rng(mix_seed(seed, 0x2000 + static_cast<uint64_t>(i)));

        for (int k = 0; k < kPoliciesPerInstance; ++k) {
            TabularPolicy pol = random_trigger_blind_policy(p.n_states, p.n_actions, pol_rng);

            const double m1 = margin_target_optimality(spec, pol);
            if (m1 < target_opt.worst_margin) target_opt.worst_margin = m1;
            if (m1 < -target_opt.tolerance && target_opt.failing_instance_json.empty()) {
                target_opt.failing_instance_json = instance_to_json(target_opt.name, spec, &pol);
            }

            const double m2 = margin_value_dominance(spec, pol);
            if (m2 < dominance.worst_margin) dominance.worst_margin = m2;
            if (m2 < -dominance.tolerance && dominance.failing_instance_json.empty()) {
                dominance.failing_instance_json = instance_to_json(dominance.name, spec, &pol);
            }

            if (k == 0) {
                const double m0 = margin_zero_rate_reduction(spec, pol);
                if (m0 < zero_rate.worst_margin) zero_rate.worst_margin = m0;
                if (m0 < -zero_rate.tolerance && zero_rate.failing_instance_json.empty()) {
                    zero_rate.failing_instance_json = instance_to_json(zero_rate.name, spec, &pol);
                }
                const double mm = margin_marginalization(spec, pol);
                if (mm < marginal.worst_margin) marginal.worst_margin = mm;
                if (mm < -marginal.tolerance && marginal.failing_instance_json.empty()) {
                    marginal.failing_instance_json = instance_to_json(marginal.name, spec, &pol);
                }
            }
        }

        const double ml1 = margin_optimal_value_preservation(spec);
        if (ml1 < preservation.worst_margin) preservation.worst_margin = ml1;
        if (ml1 < -preservation.tolerance && preservation.failing_instance_json.empty()) {
            preservation.failing_instance_json = instance_to_json(preservation.name, spec, nullptr);
        }

        const double mt2 = margin_optimality_equivalence(spec);
        if (mt2 < equivalence.worst_margin) equivalence.worst_margin = mt2;
        if (mt2 < -equivalence.tolerance && equivalence.failing_instance_json.empty()) {
            equivalence.failing_instance_json = instance_to_json(equivalence.name, spec, nullptr);
        }
    }

    PropertyResult nullity{"forced_override_invariance", true, 0.0, 1e-10,
                           "override mixing leaves triggered-start action values unchanged", ""};
    nullity.worst_margin = margin_nullity(0.9);

    PropertyResult golden_plain{"counterexample_values_reward_only", true, 0.0, 1e-6,
                                "reward-only poisoning leaves the prosper action ahead", ""};
    golden_plain.worst_margin = margin_golden_no_inception(0.9);

    PropertyResult golden_incept{"counterexample_values_inception", true, 0.0, 1e-6,
                                 "inception makes the target action optimal at the triggered start", ""};
    golden_incept.worst_margin = margin_golden_inception(0.9);

    for (PropertyResult* p : {&target_opt, &dominance, &zero_rate, &preservation, &equivalence,
                              &marginal, &nullity, &golden_plain, &golden_incept}) {
        p->passed = p->worst_margin >= -p->tolerance;
        report.properties.push_back(*p);
    }
    return report;
}

double replay_instance(const std::string& instance_json) {
    json j = json::parse(instance_json);
    const std::string property = j.at("property").get<std::string>();
    TabularMDP mdp = mdp_from_json(j.at("mdp").dump());
    const TauMode mode =
        j.at("tau_mode").get<std::string>() == "clamped" ? TauMode::clamped : TauMode::theoretical;
    AdversarialSpec spec(mdp, j.at("beta").get<double>(), j.at("target_action").get<int>(), mode,
                         j.at("initial_prev_reward").get<double>());

    TabularPolicy pol;
    const bool has_policy = j.contains("policy");
    if (has_policy) pol = policy_from_json(j.at("policy").dump());

    if (property == "target_action_optimality") return margin_target_optimality(spec, pol);
    if (property == "benign_value_dominance") return margin_value_dominance(spec, pol);
    if (property == "zero_rate_reduction") return margin_zero_rate_reduction(spec, pol);
    if (property == "optimal_value_preservation") return margin_optimal_value_preservation(spec);
    if (property == "optimality_equivalence") return margin_optimality_equivalence(spec);
    if (property == "transition_split_marginalization") return margin_marginalization(spec, pol);
    if (property == "forced_override_invariance") return margin_nullity(mdp.gamma());
    if (property == "counterexample_values_reward_only") return margin_golden_no_inception(mdp.gamma());
    if (property == "counterexample_values_inception") return margin_golden_inception(mdp.gamma());
    throw ConfigError("replay_instance: unknown property '" + property + "'");
}

}  // namespace poisonlab
