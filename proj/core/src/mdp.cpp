#include "poisonlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace poisonlab {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_distribution(const std::vector<double>& p, size_t offset, size_t n, const char* what) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double v = p[offset + i];
        if (!(v >= -kStochasticTol) || !(v <= 1.0 + kStochasticTol)) {
            throw DomainError(std::string(what) + ": entry outside [0,1]");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
        throw DomainError(std::string(what) + ": does not sum to 1 (got " + std::to_string(sum) + ")");
    }
}

}  // namespace

TabularMDP::TabularMDP(int n_states, int n_actions, std::vector<double> transition,
                       std::vector<double> reward, double gamma, std::vector<uint8_t> terminal,
                       std::vector<double> initial)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      terminal_(std::move(terminal)),
      initial_(std::move(initial)) {
    if (n_states_ < 1 || n_actions_ < 1) throw ShapeError("TabularMDP: need at least one state and action");
    const size_t tensor = static_cast<size_t>(n_states_) * n_actions_ * n_states_;
    if (transition_.size() != tensor) throw ShapeError("TabularMDP: transition tensor size mismatch");
    if (reward_.size() != tensor) throw ShapeError("TabularMDP: reward tensor size mismatch");
    if (terminal_.size() != static_cast<size_t>(n_states_)) throw ShapeError("TabularMDP: terminal mask size mismatch");
    if (initial_.size() != static_cast<size_t>(n_states_)) throw ShapeError("TabularMDP: initial distribution size mismatch");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw DomainError("TabularMDP: gamma must be in [0,1)");

    for (int s = 0; s < n_states_; ++s) {
        for (int a = 0; a < n_actions_; ++a) {
            check_distribution(transition_, idx(s, a, 0), n_states_, "transition row");
        }
    }
    check_distribution(initial_, 0, n_states_, "initial distribution");

    for (int s = 0; s < n_states_; ++s) {
        if (!terminal_[s]) continue;
        for (int a = 0; a < n_actions_; ++a) {
            if (std::abs(this->transition(s, a, s) - 1.0) > kStochasticTol) {
                throw DomainError("TabularMDP: terminal state must self-loop");
            }
            if (this->reward(s, a, s) != 0.0) {
                throw DomainError("TabularMDP: terminal self-loop must have zero reward");
            }
        }
    }

    reward_lo_ = std::numeric_limits<double>::infinity();
    reward_hi_ = -std::numeric_limits<double>::infinity();
    for (double r : reward_) {
        reward_lo_ = std::min(reward_lo_, r);
        reward_hi_ = std::max(reward_hi_, r);
    }
}

std::vector<double> TabularMDP::support_reward_values() const {
    std::vector<double> out;
    for (int s = 0; s < n_states_; ++s) {
        for (int a = 0; a < n_actions_; ++a) {
            for (int s2 = 0; s2 < n_states_; ++s2) {
                if (transition(s, a, s2) > 0.0) out.push_back(reward(s, a, s2));
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

TabularPolicy::TabularPolicy(Matrix p) : probs(std::move(p)) {
    for (int s = 0; s < probs.rows; ++s) {
        double sum = 0.0;
        for (int a = 0; a < probs.cols; ++a) {
            if (probs.at(s, a) < 0.0) throw DomainError("TabularPolicy: negative probability");
            sum += probs.at(s, a);
        }
        if (std::abs(sum - 1.0) > 1e-12) throw DomainError("TabularPolicy: row does not sum to 1");
    }
}

int TabularPolicy::greedy_action(int s) const {
    int best = 0;
    for (int a = 1; a < probs.cols; ++a) {
        if (probs.at(s, a) > probs.at(s, best)) best = a;
    }
    return best;
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
    Matrix m(n_states, n_actions, 1.0 / n_actions);
    return TabularPolicy(std::move(m));
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& actions, int n_actions) {
    Matrix m(static_cast<int>(actions.size()), n_actions, 0.0);
    for (size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions) throw DomainError("deterministic policy: action out of range");
        m.at(static_cast<int>(s), actions[s]) = 1.0;
    }
    return TabularPolicy(std::move(m));
}

int QTable::greedy_action(int s) const {
    int best = 0;
    for (int a = 1; a < values.cols; ++a) {
        if (values.at(s, a) > values.at(s, best)) best = a;
    }
    return best;
}

double QTable::max_value(int s) const {
    double best = values.at(s, 0);
    for (int a = 1; a < values.cols; ++a) best = std::max(best, values.at(s, a));
    return best;
}

TabularPolicy QTable::greedy_policy() const {
    std::vector<int> actions(values.rows);
    for (int s = 0; s < values.rows; ++s) actions[s] = greedy_action(s);
    return TabularPolicy::deterministic(actions, values.cols);
}

namespace {

void check_compatible(const TabularMDP& mdp, const TabularPolicy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
        throw ShapeError("policy shape does not match MDP");
    }
}

}  // namespace

ValueTable policy_evaluation(const TabularMDP& mdp, const TabularPolicy& policy, double tol) {
    check_compatible(mdp, policy);
    if (!(tol > 0.0)) throw DomainError("policy_evaluation: tol must be positive");

    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    const double gamma = mdp.gamma();
    std::vector<double> v(n, 0.0), v_next(n, 0.0);

    for (long sweep = 0; sweep < kMaxSolverSweeps; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            double acc = 0.0;
            for (int a = 0; a < na; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                double q = 0.0;
                for (int s2 = 0; s2 < n; ++s2) {
                    const double t = mdp.transition(s, a, s2);
                    if (t == 0.0) continue;
                    q += t * (mdp.reward(s, a, s2) + gamma * v[s2]);
                }
                acc += pa * q;
            }
            v_next[s] = acc;
            delta = std::max(delta, std::abs(v_next[s] - v[s]));
        }
        v.swap(v_next);
        if (delta <= tol) return ValueTable{std::move(v)};
    }
    throw ConvergenceError("policy_evaluation: no convergence after max sweeps");
}

std::pair<ValueTable, TabularPolicy> value_iteration(const TabularMDP& mdp, double tol) {
    if (!(tol > 0.0)) throw DomainError("value_iteration: tol must be positive");

    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    const double gamma = mdp.gamma();
    std::vector<double> v(n, 0.0), v_next(n, 0.0);
    std::vector<int> greedy(n, 0);

    for (long sweep = 0; sweep < kMaxSolverSweeps; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < na; ++a) {
                double q = 0.0;
                for (int s2 = 0; s2 < n; ++s2) {
                    const double t = mdp.transition(s, a, s2);
                    if (t == 0.0) continue;
                    q += t * (mdp.reward(s, a, s2) + gamma * v[s2]);
                }
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            v_next[s] = best;
            greedy[s] = best_a;
            delta = std::max(delta, std::abs(v_next[s] - v[s]));
        }
        v.swap(v_next);
        if (delta <= tol) {
            return {ValueTable{std::move(v)}, TabularPolicy::deterministic(greedy, na)};
        }
    }
    throw ConvergenceError("value_iteration: no convergence after max sweeps");
}

QTable q_from_policy(const TabularMDP& mdp, const TabularPolicy& policy, double tol) {
    check_compatible(mdp, policy);
    ValueTable v = policy_evaluation(mdp, policy, tol);

    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    Matrix q(n, na, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) {
            double acc = 0.0;
            for (int s2 = 0; s2 < n; ++s2) {
                const double t = mdp.transition(s, a, s2);
                if (t == 0.0) continue;
                acc += t * (mdp.reward(s, a, s2) + mdp.gamma() * v[s2]);
            }
            q.at(s, a) = acc;
        }
    }
    return QTable{std::move(q)};
}

TabularPolicy softmax_policy(const QTable& q, double temperature) {
    if (!(temperature > 0.0)) throw DomainError("softmax_policy: temperature must be positive");

    Matrix p(q.n_states(), q.n_actions(), 0.0);
    for (int s = 0; s < q.n_states(); ++s) {
        double mx = q.at(s, 0);
        for (int a = 1; a < q.n_actions(); ++a) mx = std::max(mx, q.at(s, a));
        double z = 0.0;
        for (int a = 0; a < q.n_actions(); ++a) {
            const double e = std::exp((q.at(s, a) - mx) / temperature);
            p.at(s, a) = e;
            z += e;
        }
        for (int a = 0; a < q.n_actions(); ++a) p.at(s, a) /= z;
    }
    return TabularPolicy(std::move(p));
}

}  // namespace poisonlab
