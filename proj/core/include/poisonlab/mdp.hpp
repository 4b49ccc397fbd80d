#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace poisonlab {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct BudgetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotReadyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix, sized for tabular problems.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

/// Finite MDP with transition and reward tensors on (s, a, s') triples.
///
/// Terminal states must be absorbing self-loops with zero reward; episode
/// truncation is a simulator concern and never appears here. Scalar reward
/// bounds are cached at construction by a min/max scan of the tensor.
class TabularMDP {
public:
    TabularMDP(int n_states, int n_actions,
               std::vector<double> transition,  // [s][a][s'] flattened
               std::vector<double> reward,      // [s][a][s'] flattened
               double gamma,
               std::vector<uint8_t> terminal,
               std::vector<double> initial);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }

    double transition(int s, int a, int s2) const { return transition_[idx(s, a, s2)]; }
    double reward(int s, int a, int s2) const { return reward_[idx(s, a, s2)]; }
    bool terminal(int s) const { return terminal_[s] != 0; }
    double initial(int s) const { return initial_[s]; }

    double reward_lower_bound() const { return reward_lo_; }
    double reward_upper_bound() const { return reward_hi_; }

    const std::vector<double>& transition_tensor() const { return transition_; }
    const std::vector<double>& reward_tensor() const { return reward_; }
    const std::vector<uint8_t>& terminal_mask() const { return terminal_; }
    const std::vector<double>& initial_distribution() const { return initial_; }

    /// Distinct reward values appearing on transitions with positive
    /// probability, sorted ascending.
    std::vector<double> support_reward_values() const;

    size_t idx(int s, int a, int s2) const {
        return (static_cast<size_t>(s) * n_actions_ + a) * n_states_ + s2;
    }

private:
    int n_states_;
    int n_actions_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    double gamma_;
    std::vector<uint8_t> terminal_;
    std::vector<double> initial_;
    double reward_lo_;
    double reward_hi_;
};

/// Stochastic policy as a (state, action) probability matrix.
struct TabularPolicy {
    Matrix probs;

    TabularPolicy() = default;
    explicit TabularPolicy(Matrix p);

    int n_states() const { return probs.rows; }
    int n_actions() const { return probs.cols; }
    double prob(int s, int a) const { return probs.at(s, a); }

    /// Most probable action, ties broken toward the lowest index.
    int greedy_action(int s) const;

    static TabularPolicy uniform(int n_states, int n_actions);
    static TabularPolicy deterministic(const std::vector<int>& actions, int n_actions);
};

struct ValueTable {
    std::vector<double> values;

    int size() const { return static_cast<int>(values.size()); }
    double operator[](int s) const { return values[s]; }
};

struct QTable {
    Matrix values;

    int n_states() const { return values.rows; }
    int n_actions() const { return values.cols; }
    double at(int s, int a) const { return values.at(s, a); }

    /// Greedy row maximum, ties toward the lowest action index.
    int greedy_action(int s) const;
    double max_value(int s) const;
    TabularPolicy greedy_policy() const;
};

inline constexpr long kMaxSolverSweeps = 1000000;

/// Synchronous (Jacobi) Bellman evaluation to sup-norm tolerance `tol`.
ValueTable policy_evaluation(const TabularMDP& mdp, const TabularPolicy& policy, double tol = 1e-10);

/// Value iteration; returned policy is greedy in the returned values with
/// ties broken toward the lowest action index.
std::pair<ValueTable, TabularPolicy> value_iteration(const TabularMDP& mdp, double tol = 1e-10);

/// Q(s,a) = sum_{s'} T(s,a,s') [R(s,a,s') + gamma V_pi(s')].
QTable q_from_policy(const TabularMDP& mdp, const TabularPolicy& policy, double tol = 1e-10);

/// Row-wise softmax of Q / temperature, stabilized by max subtraction.
TabularPolicy softmax_policy(const QTable& q, double temperature);

}  // namespace poisonlab
