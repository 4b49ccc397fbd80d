#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonlab/adversarial.hpp"
#include "poisonlab/envs.hpp"
#include "poisonlab/qhat.hpp"

namespace poisonlab {

enum class AttackKind { q_incept, q_vanilla, static_reward, dynamic_reward, forced_static, none };

AttackKind attack_kind_from_string(const std::string& name);
std::string attack_kind_to_string(AttackKind kind);

/// Selection/relabel metric for the Q-based attacks. `advantage` compares
/// the logged action against the estimator's own action distribution at the
/// same state; `td` compares against the observed successor's value.
enum class FMetricMode { advantage, td };

struct AttackConfig {
    AttackKind kind = AttackKind::none;
    double beta = 0.0;
    int target_action = 0;
    double static_c = 100.0;
    double forced_rho = 0.0;
    bool constrain = true;
    double start_poison_fraction = 0.1;
    bool oracle_qhat = false;
    int64_t oracle_budget_steps = 200000;
    FMetricMode metric = FMetricMode::advantage;
    QhatConfig qhat;

    void validate(int n_actions) const;
};

/// Running empirical reward bounds, widened episode by episode.
struct RewardBounds {
    double lower = std::numeric_limits<double>::infinity();
    double upper = -std::numeric_limits<double>::infinity();

    bool ready() const { return lower <= upper; }
    void widen(double r) {
        lower = std::min(lower, r);
        upper = std::max(upper, r);
    }
};

struct PoisonStats {
    int64_t poisoned = 0;
    int64_t actions_changed = 0;

    void merge(const PoisonStats& o) {
        poisoned += o.poisoned;
        actions_changed += o.actions_changed;
    }
};

RewardBounds update_bounds(RewardBounds bounds, std::span<const Transition> episode);

/// Samples k distinct indices without replacement with probabilities
/// proportional to softmax(|f_values|) at unit temperature.
std::vector<size_t> select_poison_indices(std::span<const Transition> episode,
                                          std::span<const double> f_values, size_t k, uint64_t seed);

/// Q-guided trajectory poisoning. Handles both the full attack and the
/// no-relabel ablation (config.kind == q_vanilla). Budget is
/// floor(beta * episode length).
std::pair<std::vector<Transition>, PoisonStats> poison_qincept(std::vector<Transition> episode,
                                                               const AttackConfig& config,
                                                               const QApprox& qhat,
                                                               const RewardBounds& bounds,
                                                               uint64_t seed);

/// Fixed +-c reward poisoning with optional forced action overriding
/// (probability config.forced_rho); uniform index selection.
std::pair<std::vector<Transition>, PoisonStats> poison_static(std::vector<Transition> episode,
                                                              const AttackConfig& config,
                                                              const RewardBounds& bounds, uint64_t seed);

/// Value-dependent reward poisoning 1[a == target] - gamma * V(s'); uniform
/// index selection.
std::pair<std::vector<Transition>, PoisonStats> poison_dynamic(std::vector<Transition> episode,
                                                               const AttackConfig& config,
                                                               const ValueTable& value_estimate,
                                                               const RewardBounds& bounds, uint64_t seed,
                                                               double gamma);

/// Stateful orchestrator owned by one training run: tracks bounds, the Q
/// estimate, the fractional poisoning budget and cumulative statistics.
class Attack {
public:
    Attack(AttackConfig cfg, const Environment& env, uint64_t seed);

    const AttackConfig& config() const { return cfg_; }
    const RewardBounds& bounds() const { return bounds_; }
    const QApprox* qhat() const { return qhat_ ? qhat_.get() : nullptr; }
    const Trigger& trigger() const { return trigger_; }
    bool active() const { return cfg_.kind != AttackKind::none; }
    bool ready() const { return bounds_.ready(); }

    void observe_episode(std::span<const Transition> episode);
    void set_value_estimate(ValueTable v) { value_estimate_ = std::move(v); }
    bool needs_value_estimate() const { return cfg_.kind == AttackKind::dynamic_reward; }

    /// Episode-level poisoning with a carried fractional budget; mutates the
    /// episode in place.
    PoisonStats poison_episode(std::vector<Transition>& episode);

    /// Behavioral forcing (forced_static): the override happens while the
    /// agent acts, so the environment transitions under the target action.
    bool forces_behavior() const { return cfg_.kind == AttackKind::forced_static; }
    struct ForceDecision {
        int action;
        bool marked;
        bool changed;
    };
    /// Per-step hook: marks the step for poisoning within the budget and,
    /// with probability forced_rho, overrides the executed action.
    ForceDecision pre_step(int proposed_action);
    /// Applies the trigger and the fixed reward to the steps marked by
    /// pre_step during this episode.
    PoisonStats poison_marked(std::vector<Transition>& episode,
                              std::span<const std::pair<size_t, bool>> marks);

    /// Sample-time poisoning of a drawn batch. `buffer_positions` gives each
    /// record's position in the replay buffer so the previous-step reward
    /// correction can be applied when the predecessor is in the same batch.
    PoisonStats poison_batch(std::vector<Transition>& batch, std::span<const int64_t> buffer_positions);

    /// Feed the benign copy of experience to the Q estimate and run the TD
    /// batches due at `env_steps`.
    void push_benign(const Transition& t);
    void qhat_tick(int64_t env_steps);

    int64_t total_poisoned() const { return total_.poisoned; }
    int64_t total_actions_changed() const { return total_.actions_changed; }

private:
    std::vector<double> selection_logits(std::span<const Transition> episode) const;

    AttackConfig cfg_;
    Trigger trigger_;
    double gamma_;
    RewardBounds bounds_;
    std::unique_ptr<QApprox> qhat_;
    std::optional<ValueTable> value_estimate_;
    Rng rng_;
    double budget_credit_ = 0.0;
    PoisonStats total_;
};

}  // namespace poisonlab
