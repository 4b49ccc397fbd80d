#include "poisonlab/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace poisonlab {

AdversarialSpec::AdversarialSpec(TabularMDP base_mdp, double beta_frac, int target, TauMode mode)
    : AdversarialSpec(std::move(base_mdp), beta_frac, target, mode,
                      std::numeric_limits<double>::quiet_NaN()) {}

AdversarialSpec::AdversarialSpec(TabularMDP base_mdp, double beta_frac, int target, TauMode mode,
                                 double initial_prev)
    : base(std::move(base_mdp)), trigger(base.n_states()), beta(beta_frac), target_action(target),
      tau_mode(mode), initial_prev_reward(initial_prev) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("AdversarialSpec: beta must be in [0,1]");
    if (target_action < 0 || target_action >= base.n_actions()) {
        throw DomainError("AdversarialSpec: target action out of range");
    }
    if (base.gamma() == 0.0) throw DomainError("AdversarialSpec: gamma must be positive for bounded shaping");
    if (std::isnan(initial_prev_reward)) initial_prev_reward = base.reward_lower_bound();
    if (initial_prev_reward < base.reward_lower_bound() || initial_prev_reward > base.reward_upper_bound()) {
        throw DomainError("AdversarialSpec: initial previous reward outside reward bounds");
    }
}

int AugmentedLayout::slice_for(double r) const {
    auto it = std::lower_bound(reward_values.begin(), reward_values.end(), r);
    if (it == reward_values.end()) return static_cast<int>(reward_values.size()) - 1;
    if (it == reward_values.begin()) return 0;
    const int hi = static_cast<int>(it - reward_values.begin());
    const int lo = hi - 1;
    return (r - reward_values[lo] <= reward_values[hi] - r) ? lo : hi;
}

AugmentedLayout make_layout(const AdversarialSpec& spec) {
    AugmentedLayout layout;
    layout.n_base = spec.base.n_states();
    layout.reward_values = spec.base.support_reward_values();
    auto& rv = layout.reward_values;
    auto it = std::lower_bound(rv.begin(), rv.end(), spec.initial_prev_reward);
    if (it == rv.end() || *it != spec.initial_prev_reward) rv.insert(it, spec.initial_prev_reward);
    layout.initial_slice = layout.slice_for(spec.initial_prev_reward);
    return layout;
}

double tau(const AdversarialSpec& spec, int action, double reward, double prev_reward) {
    const double lo = spec.base.reward_lower_bound();
    const double hi = spec.base.reward_upper_bound();
    if (prev_reward < lo - 1e-12 || prev_reward > hi + 1e-12) {
        throw DomainError("tau: previous reward outside [L,U]");
    }
    const double gamma = spec.base.gamma();
    if (action == spec.target_action) {
        const double shaped = reward + (prev_reward - lo) / gamma;
        return spec.tau_mode == TauMode::clamped ? std::min(shaped, hi) : shaped;
    }
    const double shaped = reward - (hi - prev_reward) / gamma;
    return spec.tau_mode == TauMode::clamped ? std::max(shaped, lo) : shaped;
}

int phi(const AdversarialSpec& spec, const QTable& q, int poisoned_state, int action) {
    if (!spec.trigger.is_poisoned(poisoned_state)) throw DomainError("phi: state is not a triggered copy");
    if (q.n_states() != spec.trigger.total_states() || q.n_actions() != spec.base.n_actions()) {
        throw ShapeError("phi: Q table must cover benign states plus triggered copies");
    }
    if (action != spec.target_action) return action;
    return q.greedy_action(spec.trigger.benign(poisoned_state));
}

namespace {

// Coupled solver over the augmented state space. In `optimize` mode the
// backup is a max and the policy used for the bias expectation is the greedy
// policy of the current iterate.
class AugmentedSolver {
public:
    AugmentedSolver(const AdversarialSpec& spec, const AdversarialEvalOptions& opts)
        : spec_(spec), opts_(opts), layout_(make_layout(spec)) {}

    const AugmentedLayout& layout() const { return layout_; }

    void set_policy(const TabularPolicy& policy) {
        if (policy.n_states() != spec_.trigger.total_states() ||
            policy.n_actions() != spec_.base.n_actions()) {
            throw ShapeError("adversarial evaluation: policy must cover benign states plus triggered copies");
        }
        const int nx = spec_.trigger.total_states();
        const int na = spec_.base.n_actions();
        pi_ = Matrix(nx, na, 0.0);
        for (int x = 0; x < nx; ++x) {
            const bool mix = spec_.trigger.is_poisoned(x) && opts_.forced_rho > 0.0;
            for (int a = 0; a < na; ++a) {
                double p = policy.prob(x, a);
                if (mix) {
                    p = (1.0 - opts_.forced_rho) * p + (a == spec_.target_action ? opts_.forced_rho : 0.0);
                }
                pi_.at(x, a) = p;
            }
        }
    }

    QTable solve(double tol, bool optimize) {
        const int n = layout_.n_base;
        const int m = layout_.n_slices();
        const int na = spec_.base.n_actions();
        const int n_aug = layout_.size();
        const TabularMDP& base = spec_.base;
        const double gamma = base.gamma();
        const double beta = spec_.beta;

        Matrix q(n_aug, na, 0.0);
        Matrix q_next(n_aug, na, 0.0);
        std::vector<double> v(n_aug, 0.0);
        // a_star[b*m+j]: greedy action of the benign copy at slice j.
        std::vector<int> a_star(static_cast<size_t>(n) * m, 0);
        // bias[x'*m+j']: correction added to rewards on transitions into the
        // triggered copy of x' arriving with slice j'. Cancels the shaping
        // the successor state will grant, keeping benign values unbiased.
        std::vector<double> bias(static_cast<size_t>(n) * m, 0.0);

        // Successor slice per base transition is the pre-shaping benign reward.
        std::vector<int> succ_slice(base.transition_tensor().size(), 0);
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < na; ++a)
                for (int s2 = 0; s2 < n; ++s2)
                    succ_slice[base.idx(s, a, s2)] = layout_.slice_for(base.reward(s, a, s2));

        for (long sweep = 0; sweep < kMaxSolverSweeps; ++sweep) {
            // Value aggregation of the current iterate.
            for (int u = 0; u < n_aug; ++u) {
                const int x = layout_.x_of(u);
                if (optimize) {
                    double best = q.at(u, 0);
                    for (int a = 1; a < na; ++a) best = std::max(best, q.at(u, a));
                    v[u] = best;
                } else {
                    double acc = 0.0;
                    for (int a = 0; a < na; ++a) acc += pi_.at(x, a) * q.at(u, a);
                    v[u] = acc;
                }
            }

            for (int b = 0; b < n; ++b) {
                for (int j = 0; j < m; ++j) {
                    const int u = layout_.index(b, j);
                    int best = 0;
                    for (int a = 1; a < na; ++a)
                        if (q.at(u, a) > q.at(u, best)) best = a;
                    a_star[static_cast<size_t>(b) * m + j] = best;
                }
            }

            for (int xp = 0; xp < n; ++xp) {
                const int px = spec_.trigger.poisoned(xp);
                for (int j = 0; j < m; ++j) {
                    const double rhat = layout_.reward_values[j];
                    double acc = 0.0;
                    for (int ap = 0; ap < na; ++ap) {
                        double weight;
                        if (optimize) {
                            const int g = [&] {
                                const int up = layout_.index(px, j);
                                int best = 0;
                                for (int a = 1; a < na; ++a)
                                    if (q.at(up, a) > q.at(up, best)) best = a;
                                return best;
                            }();
                            weight = (ap == g) ? 1.0 : 0.0;
                        } else {
                            weight = pi_.at(px, ap);
                        }
                        if (weight == 0.0) continue;
                        const int eff = (opts_.inception && ap == spec_.target_action)
                                            ? a_star[static_cast<size_t>(xp) * m + j]
                                            : ap;
                        double inner = 0.0;
                        for (int s2 = 0; s2 < n; ++s2) {
                            const double t = base.transition(xp, eff, s2);
                            if (t == 0.0) continue;
                            const double r = base.reward(xp, eff, s2);
                            inner += t * (r - tau(spec_, ap, r, rhat));
                        }
                        acc += weight * inner;
                    }
                    bias[static_cast<size_t>(xp) * m + j] = gamma * acc;
                }
            }

            double delta = 0.0;
            for (int x = 0; x < spec_.trigger.total_states(); ++x) {
                const bool is_p = spec_.trigger.is_poisoned(x);
                const int b = is_p ? spec_.trigger.benign(x) : x;
                for (int j = 0; j < m; ++j) {
                    const int u = layout_.index(x, j);
                    const double rhat = layout_.reward_values[j];
                    for (int a = 0; a < na; ++a) {
                        const int eff = (is_p && opts_.inception && a == spec_.target_action)
                                            ? a_star[static_cast<size_t>(b) * m + j]
                                            : a;
                        double acc = 0.0;
                        for (int s2 = 0; s2 < n; ++s2) {
                            const double t = base.transition(b, eff, s2);
                            if (t == 0.0) continue;
                            const double r_ben = base.reward(b, eff, s2);
                            const double r_emit = is_p ? tau(spec_, a, r_ben, rhat) : r_ben;
                            const int j2 = succ_slice[base.idx(b, eff, s2)];
                            const double v_ben = v[layout_.index(s2, j2)];
                            const double v_poi = v[layout_.index(spec_.trigger.poisoned(s2), j2)];
                            const double corr = bias[static_cast<size_t>(s2) * m + j2];
                            acc += t * (r_emit + (1.0 - beta) * gamma * v_ben + beta * (corr + gamma * v_poi));
                        }
                        q_next.at(u, a) = acc;
                        delta = std::max(delta, std::abs(acc - q.at(u, a)));
                    }
                }
            }
            q.data.swap(q_next.data);
            if (delta <= tol) {
                frozen_a_star_ = std::move(a_star);
                frozen_bias_ = std::move(bias);
                frozen_succ_slice_ = std::move(succ_slice);
                return QTable{std::move(q)};
            }
        }
        throw ConvergenceError("adversarial solver: no convergence after max sweeps");
    }

    // Tables from the converged solve, for freezing into a static tensor.
    const std::vector<int>& a_star() const { return frozen_a_star_; }
    const std::vector<double>& bias() const { return frozen_bias_; }
    const std::vector<int>& succ_slice() const { return frozen_succ_slice_; }

private:
    const AdversarialSpec& spec_;
    AdversarialEvalOptions opts_;
    AugmentedLayout layout_;
    Matrix pi_;
    std::vector<int> frozen_a_star_;
    std::vector<double> frozen_bias_;
    std::vector<int> frozen_succ_slice_;
};

}  // namespace

QTable evaluate_policy_adversarial(const AdversarialSpec& spec, const TabularPolicy& policy, double tol,
                                   const AdversarialEvalOptions& opts) {
    if (!(tol > 0.0)) throw DomainError("evaluate_policy_adversarial: tol must be positive");
    AugmentedSolver solver(spec, opts);
    solver.set_policy(policy);
    return solver.solve(tol, /*optimize=*/false);
}

std::pair<QTable, TabularPolicy> optimal_policy_adversarial(const AdversarialSpec& spec, double tol) {
    if (!(tol > 0.0)) throw DomainError("optimal_policy_adversarial: tol must be positive");
    AdversarialEvalOptions opts;  // inception on, no forcing
    AugmentedSolver solver(spec, opts);
    QTable q = solver.solve(tol, /*optimize=*/true);

    const AugmentedLayout& layout = solver.layout();
    std::vector<int> greedy(spec.trigger.total_states());
    for (int x = 0; x < spec.trigger.total_states(); ++x) {
        const int u = layout.index(x, layout.initial_slice);
        int best = 0;
        for (int a = 1; a < q.n_actions(); ++a)
            if (q.at(u, a) > q.at(u, best)) best = a;
        greedy[x] = best;
    }
    return {std::move(q), TabularPolicy::deterministic(greedy, spec.base.n_actions())};
}

AugmentedMDP build_adversarial_mdp(const AdversarialSpec& spec, const TabularPolicy& reference_policy,
                                   const AdversarialEvalOptions& opts, double tol) {
    AugmentedSolver solver(spec, opts);
    solver.set_policy(reference_policy);
    solver.solve(tol, /*optimize=*/false);

    const AugmentedLayout layout = solver.layout();
    const TabularMDP& base = spec.base;
    const int n = layout.n_base;
    const int m = layout.n_slices();
    const int na = base.n_actions();
    const int n_aug = layout.size();
    const double beta = spec.beta;

    std::vector<double> t_aug(static_cast<size_t>(n_aug) * na * n_aug, 0.0);
    std::vector<double> r_aug(static_cast<size_t>(n_aug) * na * n_aug, 0.0);
    auto flat = [&](int u, int a, int u2) {
        return (static_cast<size_t>(u) * na + a) * n_aug + u2;
    };

    for (int x = 0; x < layout.n_x(); ++x) {
        const bool is_p = spec.trigger.is_poisoned(x);
        const int b = is_p ? spec.trigger.benign(x) : x;
        for (int j = 0; j < m; ++j) {
            const int u = layout.index(x, j);
            const double rhat = layout.reward_values[j];
            for (int a = 0; a < na; ++a) {
                const int eff = (is_p && opts.inception && a == spec.target_action)
                                    ? solver.a_star()[static_cast<size_t>(b) * m + j]
                                    : a;
                for (int s2 = 0; s2 < n; ++s2) {
                    const double t = base.transition(b, eff, s2);
                    if (t == 0.0) continue;
                    const double r_ben = base.reward(b, eff, s2);
                    const double r_emit = is_p ? tau(spec, a, r_ben, rhat) : r_ben;
                    const int j2 = solver.succ_slice()[base.idx(b, eff, s2)];
                    const int u_ben = layout.index(s2, j2);
                    const int u_poi = layout.index(spec.trigger.poisoned(s2), j2);
                    t_aug[flat(u, a, u_ben)] += (1.0 - beta) * t;
                    r_aug[flat(u, a, u_ben)] = r_emit;
                    if (beta > 0.0) {
                        t_aug[flat(u, a, u_poi)] += beta * t;
                        r_aug[flat(u, a, u_poi)] = r_emit + solver.bias()[static_cast<size_t>(s2) * m + j2];
                    }
                }
            }
        }
    }

    std::vector<double> initial(n_aug, 0.0);
    for (int s = 0; s < n; ++s) initial[layout.index(s, layout.initial_slice)] = base.initial(s);

    // Absorption lives in the tensor structure; no augmented state is marked
    // terminal because triggered copies of terminal states carry shaped
    // rewards on their self-loops.
    std::vector<uint8_t> terminal(n_aug, 0);

    TabularMDP mdp(n_aug, na, std::move(t_aug), std::move(r_aug), base.gamma(), std::move(terminal),
                   std::move(initial));
    return AugmentedMDP{std::move(mdp), layout};
}

double objective_attack_success(const TabularPolicy& policy, const Trigger& trigger, int target) {
    if (policy.n_states() < trigger.total_states()) {
        throw ShapeError("objective_attack_success: policy must cover triggered copies");
    }
    double acc = 0.0;
    for (int s = 0; s < trigger.source_count; ++s) acc += policy.prob(trigger.poisoned(s), target);
    return acc / trigger.source_count;
}

double objective_stealth(const TabularPolicy& poisoned_policy, const TabularPolicy& clean_policy,
                         const TabularMDP& mdp) {
    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    if (poisoned_policy.n_states() < n || clean_policy.n_states() < n) {
        throw ShapeError("objective_stealth: policies must cover the benign states");
    }
    auto restrict_policy = [&](const TabularPolicy& p) {
        Matrix rows(n, na, 0.0);
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < na; ++a) rows.at(s, a) = p.prob(s, a);
        return TabularPolicy(std::move(rows));
    };
    ValueTable v_p = policy_evaluation(mdp, restrict_policy(poisoned_policy));
    ValueTable v_c = policy_evaluation(mdp, restrict_policy(clean_policy));
    double acc = 0.0;
    for (int s = 0; s < n; ++s) acc += std::abs(v_p[s] - v_c[s]);
    return acc / n;
}

}  // namespace poisonlab
