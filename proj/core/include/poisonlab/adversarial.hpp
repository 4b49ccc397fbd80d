#pragma once

#include <utility>
#include <vector>

#include "poisonlab/mdp.hpp"

namespace poisonlab {

/// Bijection between benign states [0, n) and their triggered copies
/// [n, 2n). State-space duplication stands in for an observation trigger.
struct Trigger {
    int source_count = 0;

    explicit Trigger(int n) : source_count(n) {}

    int poisoned(int s) const {
        if (s < 0 || s >= source_count) throw DomainError("Trigger: benign index out of range");
        return s + source_count;
    }
    int benign(int sp) const {
        if (!is_poisoned(sp)) throw DomainError("Trigger: not a poisoned index");
        return sp - source_count;
    }
    bool is_poisoned(int x) const { return x >= source_count && x < 2 * source_count; }
    int total_states() const { return 2 * source_count; }
};

/// Bounded shaping: `theoretical` applies the raw bonus/penalty used by the
/// exact analysis; `clamped` clips the shaped reward back into [L, U] and is
/// what a data-editing attacker can actually emit.
enum class TauMode { clamped, theoretical };

struct AdversarialSpec {
    TabularMDP base;
    Trigger trigger;
    double beta = 0.0;
    int target_action = 0;
    TauMode tau_mode = TauMode::clamped;
    double initial_prev_reward = 0.0;

    AdversarialSpec(TabularMDP base_mdp, double beta_frac, int target, TauMode mode);
    AdversarialSpec(TabularMDP base_mdp, double beta_frac, int target, TauMode mode, double initial_prev);
};

/// Index bookkeeping for the augmented state space (x, r_hat) where x ranges
/// over benign states plus triggered copies and r_hat over the finite set of
/// benign reward values (plus the configured initial previous reward).
struct AugmentedLayout {
    int n_base = 0;                      // |S|
    std::vector<double> reward_values;   // sorted distinct r_hat values
    int initial_slice = 0;

    int n_x() const { return 2 * n_base; }
    int n_slices() const { return static_cast<int>(reward_values.size()); }
    int size() const { return n_x() * n_slices(); }

    int index(int x, int slice) const { return x * n_slices() + slice; }
    int x_of(int u) const { return u / n_slices(); }
    int slice_of(int u) const { return u % n_slices(); }
    double rhat_of(int u) const { return reward_values[slice_of(u)]; }

    /// Nearest reward value; exact benign rewards always match exactly.
    int slice_for(double r) const;
};

AugmentedLayout make_layout(const AdversarialSpec& spec);

/// The adversarial MDP materialized as a plain tabular MDP over augmented
/// states, with the map back to (x, r_hat).
struct AugmentedMDP {
    TabularMDP mdp;
    AugmentedLayout layout;
};

struct AdversarialEvalOptions {
    bool inception = true;   // route the target action through the best action
    double forced_rho = 0.0; // probability of overriding the policy with the target action at triggered states
};

/// Action override: the target action routes to the benign-greedy action of
/// the benign copy, every other action passes through. `q` is indexed over
/// benign states plus triggered copies.
int phi(const AdversarialSpec& spec, const QTable& q, int poisoned_state, int action);

/// Maximum in-bounds bonus (target action) or penalty (otherwise) given the
/// previous step's reward.
double tau(const AdversarialSpec& spec, int action, double reward, double prev_reward);

/// Builds the augmented tabular MDP. The override routing and the
/// bias-correction expectation on transitions into triggered states are
/// frozen from the converged coupled evaluation under `reference_policy`
/// (rows over benign states plus triggered copies).
AugmentedMDP build_adversarial_mdp(const AdversarialSpec& spec, const TabularPolicy& reference_policy,
                                   const AdversarialEvalOptions& opts = {}, double tol = 1e-10);

/// Coupled fixed-point evaluation of `policy` on the adversarial MDP: the
/// override is re-derived from the current iterate at the benign copies on
/// every sweep. Returns Q over augmented states (layout = make_layout(spec)).
QTable evaluate_policy_adversarial(const AdversarialSpec& spec, const TabularPolicy& policy, double tol = 1e-10,
                                   const AdversarialEvalOptions& opts = {});

/// Generalized value iteration on the adversarial MDP; the target-action
/// backup at triggered states routes through the argmax of the current
/// iterate. Returns the augmented Q and the greedy policy collapsed to
/// benign states plus triggered copies (at the initial r_hat slice).
std::pair<QTable, TabularPolicy> optimal_policy_adversarial(const AdversarialSpec& spec, double tol = 1e-10);

/// Mean probability of the target action over all triggered copies.
double objective_attack_success(const TabularPolicy& policy, const Trigger& trigger, int target);

/// Mean absolute value gap on the benign MDP between two policies.
double objective_stealth(const TabularPolicy& poisoned_policy, const TabularPolicy& clean_policy,
                         const TabularMDP& mdp);

}  // namespace poisonlab
