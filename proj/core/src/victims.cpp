#include "poisonlab/victims.hpp"

#include <algorithm>
#include <cmath>

namespace poisonlab {

VictimAlgo victim_algo_from_string(const std::string& name) {
    if (name == "q_learning") return VictimAlgo::q_learning;
    if (name == "dqn_lite") return VictimAlgo::dqn_lite;
    throw ConfigError("unknown victim algo '" + name + "'");
}

std::string victim_algo_to_string(VictimAlgo algo) {
    return algo == VictimAlgo::q_learning ? "q_learning" : "dqn_lite";
}

void VictimConfig::validate() const {
    if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0)) {
        throw ConfigError("victim epsilon must be in [0,1]");
    }
    if (epsilon.decay_steps < 1) throw ConfigError("victim epsilon decay_steps must be positive");
    if (total_steps < 1) throw ConfigError("victim total_steps must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("victim learning rate must be positive");
    if (eval_episodes < 1) throw ConfigError("victim eval_episodes must be at least 1");
}

VictimQTable::VictimQTable(int n_benign, int n_actions)
    : n_benign_(n_benign), n_actions_(n_actions), table_(2 * n_benign, n_actions, 0.0),
      seen_(static_cast<size_t>(2 * n_benign) * n_actions, 0) {}

double VictimQTable::value(int x, int a) const {
    if (x >= n_benign_ && !seen_[static_cast<size_t>(x) * n_actions_ + a]) {
        return table_.at(x - n_benign_, a);
    }
    return table_.at(x, a);
}

double VictimQTable::max_value(int x) const {
    double best = value(x, 0);
    for (int a = 1; a < n_actions_; ++a) best = std::max(best, value(x, a));
    return best;
}

int VictimQTable::greedy_action(int x) const {
    int best = 0;
    for (int a = 1; a < n_actions_; ++a) {
        if (value(x, a) > value(x, best)) best = a;
    }
    return best;
}

void VictimQTable::update(const VictimView& view, double lr, double gamma) {
    const double target = view.reward + (view.terminal ? 0.0 : gamma * max_value(view.next_state));
    // Reads fall back to the benign entry, but stored evidence accumulates in
    // the pair's own cell: a triggered pair overrides the benign prior only
    // once its own data supports it.
    const double cur = table_.at(view.state, view.action);
    table_.at(view.state, view.action) = cur + lr * (target - cur);
    seen_[static_cast<size_t>(view.state) * n_actions_ + view.action] = 1;
}

TabularPolicy VictimQTable::greedy_policy() const {
    std::vector<int> actions(n_states());
    for (int x = 0; x < n_states(); ++x) actions[x] = greedy_action(x);
    return TabularPolicy::deterministic(actions, n_actions_);
}

TabularPolicy VictimQTable::greedy_benign_policy() const {
    std::vector<int> actions(n_benign_);
    for (int x = 0; x < n_benign_; ++x) actions[x] = greedy_action(x);
    return TabularPolicy::deterministic(actions, n_actions_);
}

namespace {

int epsilon_greedy(const VictimQTable& q, int state, double eps, Rng& rng, int n_actions) {
    if (rng.next_double() < eps) return rng.next_index(n_actions);
    return q.greedy_action(state);
}

struct CheckpointTracker {
    int checkpoints;
    int64_t total_steps;
    int next = 1;

    int64_t boundary() const {
        return total_steps * static_cast<int64_t>(next) / checkpoints;
    }
};

}  // namespace

std::pair<TabularPolicy, RunReport> train_poisoned(const Environment& env, const VictimConfig& victim,
                                                   const AttackConfig& attack_cfg, int checkpoints) {
    victim.validate();
    attack_cfg.validate(env.mdp.n_actions());
    if (checkpoints < 1) throw ConfigError("train_poisoned: need at least one checkpoint");

    const TabularMDP& mdp = env.mdp;
    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    const double gamma = mdp.gamma();

    Simulator sim(env, mix_seed(victim.seed, 0x51AULL));
    Rng behavior_rng(mix_seed(victim.seed, 0xBE4ULL));
    VictimQTable q(n, na);
    Attack attack(attack_cfg, env, mix_seed(victim.seed, 0xA77ULL));
    DetectorState det{mdp.reward_lower_bound(), mdp.reward_upper_bound(), 0, 0};
    Trigger trigger(n);

    RunReport report;
    report.seed = victim.seed;
    report.attack_kind = attack_cfg.kind;
    report.beta = attack_cfg.beta;

    CheckpointTracker tracker{checkpoints, victim.total_steps};
    const int64_t start_at =
        static_cast<int64_t>(attack_cfg.start_poison_fraction * static_cast<double>(victim.total_steps));

    // Cached exact evaluation of the victim's greedy policy for the
    // value-dependent attack; refreshed only when the greedy policy moves.
    std::vector<int> cached_greedy;
    ValueTable cached_values;

    auto emit_checkpoints = [&](int64_t env_steps, bool force_final) {
        while (tracker.next <= tracker.checkpoints &&
               (env_steps >= tracker.boundary() || (force_final && tracker.next == tracker.checkpoints))) {
            TabularPolicy pol = q.greedy_policy();
            CheckpointRow row;
            row.checkpoint = tracker.next;
            row.env_steps = env_steps;
            row.asr = attack_cfg.kind == AttackKind::none
                          ? std::nan("")
                          : evaluate_asr(env, pol, trigger, attack_cfg.target_action, victim.eval_episodes,
                                         mix_seed(victim.seed, 0xE0A0ULL + tracker.next));
            row.br = evaluate_br(env, pol, victim.eval_episodes, mix_seed(victim.seed, 0xE0B0ULL + tracker.next));
            row.poisoned_steps = attack.total_poisoned();
            row.actions_changed_ratio =
                attack.total_poisoned() > 0
                    ? static_cast<double>(attack.total_actions_changed()) / attack.total_poisoned()
                    : 0.0;
            row.detector_flags = det.flags;
            report.rows.push_back(row);
            ++tracker.next;
        }
    };

    int64_t step = 0;

    if (victim.algo == VictimAlgo::q_learning) {
        while (step < victim.total_steps) {
            std::vector<Transition> episode;
            std::vector<std::pair<size_t, bool>> marks;
            sim.reset();
            for (int t = 0; t < env.episode_horizon; ++t) {
                const int s = sim.state();
                int a = epsilon_greedy(q, s, victim.epsilon.at(step), behavior_rng, na);
                if (attack.forces_behavior() && step >= start_at && attack.ready()) {
                    Attack::ForceDecision fd = attack.pre_step(a);
                    a = fd.action;
                    if (fd.marked) marks.emplace_back(episode.size(), fd.changed);
                }
                StepResult res = sim.step(a);
                const bool truncated = t + 1 == env.episode_horizon;
                episode.push_back(
                    Transition{s, a, res.reward, res.next_state, res.terminal || truncated, res.terminal,
                               false, false});
                ++step;
                if (res.terminal) break;
            }

            attack.observe_episode(episode);
            std::vector<Transition> benign_copy;
            if (attack.qhat() != nullptr) benign_copy = episode;

            if (attack.forces_behavior()) {
                attack.poison_marked(episode, marks);
            } else if (attack.active() && step >= start_at && attack.ready()) {
                if (attack.needs_value_estimate()) {
                    TabularPolicy greedy = q.greedy_benign_policy();
                    std::vector<int> actions(n);
                    for (int s = 0; s < n; ++s) actions[s] = greedy.greedy_action(s);
                    if (actions != cached_greedy) {
                        cached_values = policy_evaluation(mdp, greedy, 1e-8);
                        cached_greedy = actions;
                    }
                    attack.set_value_estimate(cached_values);
                }
                attack.poison_episode(episode);
            }

            for (const Transition& t : benign_copy) attack.push_benign(t);
            attack.qhat_tick(step);

            for (const Transition& t : episode) {
                detect(det, t.reward);
                q.update(victim_view(t), victim.learning_rate, gamma);
            }
            emit_checkpoints(step, step >= victim.total_steps);
        }
    } else {
        // dqn_lite: store clean, poison at sample time.
        std::vector<Transition> buffer;
        std::vector<int64_t> positions;
        buffer.reserve(std::min<int64_t>(victim.replay_capacity, victim.total_steps));
        positions.reserve(buffer.capacity());
        int64_t inserted = 0;
        size_t head = 0;
        Rng sample_rng(mix_seed(victim.seed, 0xD4ULL));
        std::vector<Transition> episode;

        while (step < victim.total_steps) {
            if (episode.empty()) sim.reset();
            const int s = sim.state();
            int a = epsilon_greedy(q, s, victim.epsilon.at(step), behavior_rng, na);
            Attack::ForceDecision fd{a, false, false};
            if (attack.forces_behavior() && step >= start_at && attack.ready()) {
                fd = attack.pre_step(a);
                a = fd.action;
            }
            StepResult res = sim.step(a);
            const bool truncated = static_cast<int>(episode.size()) + 1 == env.episode_horizon;
            Transition tr{s, a, res.reward, res.next_state, res.terminal || truncated, res.terminal,
                          false, false};
            episode.push_back(tr);  // benign copy, used for the bound updates
            ++step;

            Transition stored = tr;
            if (fd.marked) {
                // Behavioral forcing poisons at store time; the environment
                // already transitioned under the executed action.
                std::vector<Transition> one{stored};
                std::pair<size_t, bool> mark{0, fd.changed};
                attack.poison_marked(one, std::span<const std::pair<size_t, bool>>(&mark, 1));
                stored = one[0];
            }
            if (buffer.size() < static_cast<size_t>(victim.replay_capacity)) {
                buffer.push_back(stored);
                positions.push_back(inserted);
            } else {
                buffer[head] = stored;
                positions[head] = inserted;
                head = (head + 1) % buffer.size();
            }
            ++inserted;
            attack.push_benign(tr);
            attack.qhat_tick(step);

            if (tr.done) {
                attack.observe_episode(episode);
                episode.clear();
            }

            if (step >= victim.warmup_steps && step % victim.train_period == 0 && !buffer.empty()) {
                std::vector<Transition> batch;
                std::vector<int64_t> batch_pos;
                batch.reserve(victim.batch_size);
                for (int i = 0; i < victim.batch_size; ++i) {
                    const int j = sample_rng.next_index(static_cast<int>(buffer.size()));
                    batch.push_back(buffer[j]);
                    batch_pos.push_back(positions[j]);
                }
                if (attack.active() && step >= start_at && attack.ready()) {
                    if (attack.needs_value_estimate()) {
                        TabularPolicy greedy = q.greedy_benign_policy();
                        std::vector<int> actions(n);
                        for (int si = 0; si < n; ++si) actions[si] = greedy.greedy_action(si);
                        if (actions != cached_greedy) {
                            cached_values = policy_evaluation(mdp, greedy, 1e-8);
                            cached_greedy = actions;
                        }
                        attack.set_value_estimate(cached_values);
                    }
                    attack.poison_batch(batch, batch_pos);
                }
                for (const Transition& t : batch) {
                    detect(det, t.reward);
                    q.update(victim_view(t), victim.learning_rate, gamma);
                }
            }
            emit_checkpoints(step, step >= victim.total_steps);
        }
    }

    return {q.greedy_policy(), std::move(report)};
}

double evaluate_asr(const Environment& env, const TabularPolicy& policy, const Trigger& trigger,
                    int target, int episodes, uint64_t seed) {
    if (episodes < 1) throw DomainError("evaluate_asr: need at least one episode");
    Simulator sim(env, mix_seed(seed, 0xA52ULL));
    int64_t hits = 0, total = 0;
    for (int e = 0; e < episodes; ++e) {
        sim.reset();
        for (int t = 0; t < env.episode_horizon; ++t) {
            const int obs = trigger.poisoned(sim.state());
            const int a = policy.greedy_action(obs);
            hits += (a == target) ? 1 : 0;
            ++total;
            StepResult res = sim.step(a);
            if (res.terminal) break;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

double evaluate_br(const Environment& env, const TabularPolicy& policy, int episodes, uint64_t seed) {
    if (episodes < 1) throw DomainError("evaluate_br: need at least one episode");
    Simulator sim(env, mix_seed(seed, 0xB12ULL));
    Rng rng(mix_seed(seed, 0xB13ULL));
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        sim.reset();
        for (int t = 0; t < env.episode_horizon; ++t) {
            const int s = sim.state();
            double u = rng.next_double();
            int a = policy.n_actions() - 1;
            for (int i = 0; i < policy.n_actions(); ++i) {
                u -= policy.prob(s, i);
                if (u < 0.0) {
                    a = i;
                    break;
                }
            }
            StepResult res = sim.step(a);
            total += res.reward;
            if (res.terminal) break;
        }
    }
    return total / episodes;
}

}  // namespace poisonlab
