#include "poisonlab/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace poisonlab {

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "q_incept") return AttackKind::q_incept;
    if (name == "q_vanilla") return AttackKind::q_vanilla;
    if (name == "static") return AttackKind::static_reward;
    if (name == "dynamic") return AttackKind::dynamic_reward;
    if (name == "forced_static") return AttackKind::forced_static;
    if (name == "none") return AttackKind::none;
    throw ConfigError("unknown attack kind '" + name + "'");
}

std::string attack_kind_to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::q_incept: return "q_incept";
        case AttackKind::q_vanilla: return "q_vanilla";
        case AttackKind::static_reward: return "static";
        case AttackKind::dynamic_reward: return "dynamic";
        case AttackKind::forced_static: return "forced_static";
        case AttackKind::none: return "none";
    }
    return "none";
}

void AttackConfig::validate(int n_actions) const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("attack beta must be in [0,1]");
    if (kind != AttackKind::none && (target_action < 0 || target_action >= n_actions)) {
        throw ConfigError("attack target action out of range");
    }
    if (!(static_c > 0.0)) throw ConfigError("attack static_c must be positive");
    if (!(forced_rho >= 0.0 && forced_rho <= 1.0)) throw ConfigError("attack forced_rho must be in [0,1]");
    if (!(start_poison_fraction >= 0.0 && start_poison_fraction <= 1.0)) {
        throw ConfigError("attack start_poison_fraction must be in [0,1]");
    }
}

RewardBounds update_bounds(RewardBounds bounds, std::span<const Transition> episode) {
    for (const Transition& t : episode) bounds.widen(t.reward);
    return bounds;
}

std::vector<size_t> select_poison_indices(std::span<const Transition> episode,
                                          std::span<const double> f_values, size_t k, uint64_t seed) {
    if (f_values.size() != episode.size()) throw ShapeError("select_poison_indices: f_values size mismatch");
    if (k > episode.size()) throw BudgetError("select_poison_indices: k exceeds episode length");

    const size_t n = episode.size();
    std::vector<double> weights(n);
    double mx = 0.0;
    for (size_t i = 0; i < n; ++i) mx = std::max(mx, std::abs(f_values[i]));
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        weights[i] = std::exp(std::abs(f_values[i]) - mx);
        total += weights[i];
    }

    Rng rng(mix_seed(seed, 0x5e1ec7ULL));
    std::vector<size_t> picked;
    picked.reserve(k);
    for (size_t draw = 0; draw < k; ++draw) {
        const int i = rng.next_weighted(weights, total);
        picked.push_back(static_cast<size_t>(i));
        total -= weights[i];
        weights[i] = 0.0;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

namespace {

size_t episode_budget(double beta, size_t length) {
    return static_cast<size_t>(std::floor(beta * static_cast<double>(length)));
}

void apply_trigger_edits(std::vector<Transition>& ep, size_t t, const Trigger& trigger) {
    ep[t].state = trigger.poisoned(ep[t].state);
    ep[t].poisoned = true;
    if (t > 0) ep[t - 1].next_state = ep[t].state;  // keep the stored sequence consistent
}

std::vector<double> qincept_f_values(std::span<const Transition> episode, const AttackConfig& cfg,
                                     const QApprox& qhat) {
    std::vector<double> f(episode.size());
    for (size_t i = 0; i < episode.size(); ++i) {
        const Transition& t = episode[i];
        f[i] = cfg.metric == FMetricMode::advantage
                   ? f_advantage(qhat, t.state, t.action)
                   : f_metric(qhat, t.state, t.action, t.next_state, t.terminal);
    }
    return f;
}

std::vector<double> qincept_selection_logits(std::span<const Transition> episode, const AttackConfig& cfg,
                                             std::span<const double> f) {
    // Steps whose logged action is already the target but whose metric is
    // non-positive teach the wrong successor value when rewarded; give them
    // no selection preference.
    std::vector<double> logits(episode.size());
    for (size_t i = 0; i < episode.size(); ++i) {
        const bool eligible = f[i] > 0.0 || episode[i].action != cfg.target_action;
        logits[i] = eligible ? f[i] : 0.0;
    }
    return logits;
}

PoisonStats qincept_apply(std::vector<Transition>& ep, const std::vector<size_t>& picked,
                          std::span<const double> f, const AttackConfig& cfg, const Trigger& trigger,
                          const RewardBounds& bounds, double gamma) {
    PoisonStats stats;
    for (size_t t : picked) {
        apply_trigger_edits(ep, t, trigger);
        const double r_old = ep[t].reward;
        if (cfg.kind != AttackKind::q_vanilla && f[t] > 0.0) {
            if (ep[t].action != cfg.target_action) {
                ep[t].action = cfg.target_action;
                ep[t].action_changed = true;
                ++stats.actions_changed;
            }
        }
        ep[t].reward = ep[t].action == cfg.target_action ? bounds.upper : bounds.lower;
        if (t > 0 && !ep[t - 1].poisoned) {
            const double corrected = ep[t - 1].reward - gamma * (ep[t].reward - r_old);
            ep[t - 1].reward = std::clamp(corrected, bounds.lower, bounds.upper);
        }
        ++stats.poisoned;
    }
    return stats;
}

PoisonStats qincept_poison_k(std::vector<Transition>& ep, size_t k, const AttackConfig& cfg,
                             const QApprox& qhat, const RewardBounds& bounds, uint64_t seed) {
    if (k == 0) return {};
    std::vector<double> f = qincept_f_values(ep, cfg, qhat);
    std::vector<double> logits = qincept_selection_logits(ep, cfg, f);
    std::vector<size_t> picked = select_poison_indices(ep, logits, k, seed);
    return qincept_apply(ep, picked, f, cfg, Trigger(qhat.n_states()), bounds, qhat.gamma());
}

PoisonStats static_poison_k(std::vector<Transition>& ep, size_t k, const AttackConfig& cfg,
                            const Trigger& trigger, const RewardBounds& bounds, uint64_t seed) {
    if (k == 0) return {};
    std::vector<double> flat(ep.size(), 0.0);
    std::vector<size_t> picked = select_poison_indices(ep, flat, k, seed);
    Rng rng(mix_seed(seed, 0xF02CEDULL));

    PoisonStats stats;
    for (size_t t : picked) {
        apply_trigger_edits(ep, t, trigger);
        if (cfg.forced_rho > 0.0 && rng.next_double() < cfg.forced_rho) {
            if (ep[t].action != cfg.target_action) {
                ep[t].action = cfg.target_action;
                ep[t].action_changed = true;
                ++stats.actions_changed;
            }
        }
        double r = ep[t].action == cfg.target_action ? cfg.static_c : -cfg.static_c;
        if (cfg.constrain) r = std::clamp(r, bounds.lower, bounds.upper);
        ep[t].reward = r;
        ++stats.poisoned;
    }
    return stats;
}

PoisonStats dynamic_poison_k(std::vector<Transition>& ep, size_t k, const AttackConfig& cfg,
                             const Trigger& trigger, const ValueTable& value_estimate,
                             const RewardBounds& bounds, uint64_t seed, double gamma) {
    if (k == 0) return {};
    std::vector<double> flat(ep.size(), 0.0);
    std::vector<size_t> picked = select_poison_indices(ep, flat, k, seed);

    PoisonStats stats;
    for (size_t t : picked) {
        const int succ_benign = ep[t].next_state;
        apply_trigger_edits(ep, t, trigger);
        const double indicator = ep[t].action == cfg.target_action ? 1.0 : 0.0;
        double r = indicator - gamma * value_estimate[succ_benign];
        if (cfg.constrain) r = std::clamp(r, bounds.lower, bounds.upper);
        ep[t].reward = r;
        ++stats.poisoned;
    }
    return stats;
}

}  // namespace

std::pair<std::vector<Transition>, PoisonStats> poison_qincept(std::vector<Transition> episode,
                                                               const AttackConfig& config,
                                                               const QApprox& qhat,
                                                               const RewardBounds& bounds, uint64_t seed) {
    if (!bounds.ready()) throw NotReadyError("poison_qincept: reward bounds not initialized");
    PoisonStats stats = qincept_poison_k(episode, episode_budget(config.beta, episode.size()), config,
                                         qhat, bounds, seed);
    return {std::move(episode), stats};
}

std::pair<std::vector<Transition>, PoisonStats> poison_static(std::vector<Transition> episode,
                                                              const AttackConfig& config,
                                                              const RewardBounds& bounds, uint64_t seed) {
    if (!bounds.ready() && config.constrain) throw NotReadyError("poison_static: reward bounds not initialized");
    int n_benign = 0;
    for (const Transition& t : episode) n_benign = std::max({n_benign, t.state + 1, t.next_state + 1});
    Trigger trigger(n_benign);
    PoisonStats stats = static_poison_k(episode, episode_budget(config.beta, episode.size()), config,
                                        trigger, bounds, seed);
    return {std::move(episode), stats};
}

std::pair<std::vector<Transition>, PoisonStats> poison_dynamic(std::vector<Transition> episode,
                                                               const AttackConfig& config,
                                                               const ValueTable& value_estimate,
                                                               const RewardBounds& bounds, uint64_t seed,
                                                               double gamma) {
    if (!bounds.ready() && config.constrain) throw NotReadyError("poison_dynamic: reward bounds not initialized");
    Trigger trigger(value_estimate.size());
    PoisonStats stats = dynamic_poison_k(episode, episode_budget(config.beta, episode.size()), config,
                                         trigger, value_estimate, bounds, seed, gamma);
    return {std::move(episode), stats};
}

Attack::Attack(AttackConfig cfg, const Environment& env, uint64_t seed)
    : cfg_(std::move(cfg)), trigger_(env.mdp.n_states()), gamma_(env.mdp.gamma()),
      rng_(mix_seed(seed, 0xA77ACBULL)) {
    cfg_.validate(env.mdp.n_actions());
    if (cfg_.kind == AttackKind::q_incept || cfg_.kind == AttackKind::q_vanilla) {
        if (cfg_.oracle_qhat) {
            qhat_ = std::make_unique<QApprox>(
                pretrain_oracle(env, cfg_.oracle_budget_steps, mix_seed(seed, 0x0AC1ULL)));
        } else {
            qhat_ = std::make_unique<QApprox>(env.mdp.n_states(), env.mdp.n_actions(), gamma_,
                                              QhatMode::tabular, cfg_.qhat);
        }
    }
}

void Attack::observe_episode(std::span<const Transition> episode) {
    bounds_ = update_bounds(bounds_, episode);
}

std::vector<double> Attack::selection_logits(std::span<const Transition> episode) const {
    if (cfg_.kind == AttackKind::q_incept || cfg_.kind == AttackKind::q_vanilla) {
        std::vector<double> f = qincept_f_values(episode, cfg_, *qhat_);
        return qincept_selection_logits(episode, cfg_, f);
    }
    return std::vector<double>(episode.size(), 0.0);
}

PoisonStats Attack::poison_episode(std::vector<Transition>& episode) {
    if (!active() || episode.empty()) return {};
    if (!bounds_.ready()) throw NotReadyError("Attack: reward bounds not initialized");

    budget_credit_ += cfg_.beta * static_cast<double>(episode.size());
    size_t k = static_cast<size_t>(std::floor(budget_credit_));
    k = std::min(k, episode.size());
    if (k == 0) return {};
    budget_credit_ -= static_cast<double>(k);

    const uint64_t seed = rng_.next_u64();
    PoisonStats stats;
    switch (cfg_.kind) {
        case AttackKind::q_incept:
        case AttackKind::q_vanilla:
            stats = qincept_poison_k(episode, k, cfg_, *qhat_, bounds_, seed);
            break;
        case AttackKind::static_reward:
        case AttackKind::forced_static:
            stats = static_poison_k(episode, k, cfg_, trigger_, bounds_, seed);
            break;
        case AttackKind::dynamic_reward:
            if (!value_estimate_) throw NotReadyError("Attack: dynamic poisoning needs a value estimate");
            stats = dynamic_poison_k(episode, k, cfg_, trigger_, *value_estimate_, bounds_, seed, gamma_);
            break;
        case AttackKind::none:
            break;
    }
    total_.merge(stats);
    return stats;
}

Attack::ForceDecision Attack::pre_step(int proposed_action) {
    ForceDecision out{proposed_action, false, false};
    if (!forces_behavior()) return out;
    budget_credit_ += cfg_.beta;
    if (budget_credit_ >= 1.0 && rng_.next_double() < cfg_.beta) {
        budget_credit_ -= 1.0;
        out.marked = true;
        if (rng_.next_double() < cfg_.forced_rho && proposed_action != cfg_.target_action) {
            out.action = cfg_.target_action;
            out.changed = true;
        }
    }
    return out;
}

PoisonStats Attack::poison_marked(std::vector<Transition>& episode,
                                  std::span<const std::pair<size_t, bool>> marks) {
    PoisonStats stats;
    for (const auto& [t, changed] : marks) {
        Transition& tr = episode[t];
        tr.state = trigger_.poisoned(tr.state);
        tr.poisoned = true;
        tr.action_changed = changed;
        if (t > 0) episode[t - 1].next_state = tr.state;
        double r = tr.action == cfg_.target_action ? cfg_.static_c : -cfg_.static_c;
        tr.reward = cfg_.constrain ? std::clamp(r, bounds_.lower, bounds_.upper) : r;
        ++stats.poisoned;
        stats.actions_changed += changed;
    }
    total_.merge(stats);
    return stats;
}

PoisonStats Attack::poison_batch(std::vector<Transition>& batch, std::span<const int64_t> buffer_positions) {
    if (!active() || batch.empty()) return {};
    if (!bounds_.ready()) throw NotReadyError("Attack: reward bounds not initialized");
    if (buffer_positions.size() != batch.size()) throw ShapeError("poison_batch: positions size mismatch");

    budget_credit_ += cfg_.beta * static_cast<double>(batch.size());
    size_t k = static_cast<size_t>(std::floor(budget_credit_));
    k = std::min(k, batch.size());
    if (k == 0) return {};
    budget_credit_ -= static_cast<double>(k);

    const uint64_t seed = rng_.next_u64();
    const bool q_guided = cfg_.kind == AttackKind::q_incept || cfg_.kind == AttackKind::q_vanilla;
    std::vector<double> f =
        q_guided ? qincept_f_values(batch, cfg_, *qhat_) : std::vector<double>(batch.size(), 0.0);
    std::vector<double> logits = q_guided ? qincept_selection_logits(batch, cfg_, f) : f;
    std::vector<size_t> picked = select_poison_indices(batch, logits, k, seed);
    Rng rng(mix_seed(seed, 0xBA7C4ULL));

    PoisonStats stats;
    for (size_t i : picked) {
        Transition& t = batch[i];
        const double r_old = t.reward;
        t.state = trigger_.poisoned(t.state);
        t.poisoned = true;
        switch (cfg_.kind) {
            case AttackKind::q_incept:
                if (f[i] > 0.0 && t.action != cfg_.target_action) {
                    t.action = cfg_.target_action;
                    t.action_changed = true;
                    ++stats.actions_changed;
                }
                [[fallthrough]];
            case AttackKind::q_vanilla:
                t.reward = t.action == cfg_.target_action ? bounds_.upper : bounds_.lower;
                break;
            case AttackKind::static_reward:
            case AttackKind::forced_static: {
                if (cfg_.forced_rho > 0.0 && rng.next_double() < cfg_.forced_rho &&
                    t.action != cfg_.target_action) {
                    t.action = cfg_.target_action;
                    t.action_changed = true;
                    ++stats.actions_changed;
                }
                double r = t.action == cfg_.target_action ? cfg_.static_c : -cfg_.static_c;
                t.reward = cfg_.constrain ? std::clamp(r, bounds_.lower, bounds_.upper) : r;
                break;
            }
            case AttackKind::dynamic_reward: {
                if (!value_estimate_) throw NotReadyError("Attack: dynamic poisoning needs a value estimate");
                const double indicator = t.action == cfg_.target_action ? 1.0 : 0.0;
                double r = indicator - gamma_ * (*value_estimate_)[t.next_state];
                t.reward = cfg_.constrain ? std::clamp(r, bounds_.lower, bounds_.upper) : r;
                break;
            }
            case AttackKind::none:
                break;
        }
        ++stats.poisoned;

        // Previous-step correction, only when the predecessor was drawn into
        // the same batch and is not itself poisoned.
        if (cfg_.kind == AttackKind::q_incept || cfg_.kind == AttackKind::q_vanilla) {
            for (size_t j = 0; j < batch.size(); ++j) {
                if (buffer_positions[j] + 1 == buffer_positions[i] && !batch[j].done && !batch[j].poisoned) {
                    const double corrected = batch[j].reward - gamma_ * (t.reward - r_old);
                    batch[j].reward = std::clamp(corrected, bounds_.lower, bounds_.upper);
                    batch[j].next_state = t.state;
                    break;
                }
            }
        }
    }
    total_.merge(stats);
    return stats;
}

void Attack::push_benign(const Transition& t) {
    if (qhat_) qhat_->push_benign(t);
}

void Attack::qhat_tick(int64_t env_steps) {
    if (qhat_) qhat_->tick(env_steps, rng_);
}

}  // namespace poisonlab
