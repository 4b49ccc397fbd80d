#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poisonlab/envs.hpp"
#include "poisonlab/mdp.hpp"

namespace poisonlab {

/// One logged step of experience. `done` marks the end of an episode
/// (termination or horizon truncation); `terminal` marks real environment
/// termination and is what masks bootstrapping.
struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    bool done = false;
    bool terminal = false;
    bool poisoned = false;
    bool action_changed = false;
};

enum class QhatMode { tabular, oracle };

struct QhatConfig {
    double learning_rate = 0.2;
    int replay_capacity = 100000;
    int update_period = 4;  // benign environment steps per TD batch
    int batch_size = 32;
};

/// The adversary's Q estimate, trained by temporal-difference updates on
/// benign experience only. Oracle instances are pre-trained and frozen.
class QApprox {
public:
    QApprox(int n_states, int n_actions, double gamma, QhatMode mode, QhatConfig cfg);

    QhatMode mode() const { return mode_; }
    double gamma() const { return gamma_; }
    const QhatConfig& config() const { return cfg_; }
    int n_states() const { return table_.rows; }
    int n_actions() const { return table_.cols; }
    double value(int s, int a) const { return table_.at(s, a); }
    double max_value(int s) const;

    /// One TD step; no-op in oracle mode.
    void apply_td(int s, int a, double r, int s_next, bool terminal);

    /// Replay of benign transitions. Rejects any triggered-copy index.
    void push_benign(const Transition& t);
    size_t replay_size() const { return replay_full_ ? replay_.size() : replay_head_; }

    /// Runs the TD batches that `env_steps` entitles since the last call.
    void tick(int64_t env_steps, Rng& rng);

    void freeze_as_oracle() { mode_ = QhatMode::oracle; }

    bool oracle_converged = false;
    double oracle_residual = 0.0;

    Matrix& raw_table() { return table_; }
    const Matrix& raw_table() const { return table_; }

private:
    QhatMode mode_;
    QhatConfig cfg_;
    double gamma_;
    Matrix table_;
    std::vector<Transition> replay_;
    size_t replay_head_ = 0;
    bool replay_full_ = false;
    int64_t updates_done_ = 0;
};

/// One TD step per transition in order; returns the updated estimate.
QApprox qhat_update(QApprox q, std::span<const Transition> batch);

/// Relative-value metric sampled at the trajectory's observed successor:
/// Q(s,a) minus the softmax-weighted value of the successor state. Terminal
/// successors contribute zero continuation.
double f_metric(const QApprox& q, int s, int a, int s_next, bool next_terminal = false);

/// Same-state softmax advantage: Q(s,a) minus the softmax-weighted value of
/// s itself. Positive exactly when the logged action beats the estimator's
/// own action distribution, which is the property the relabeling step needs.
double f_advantage(const QApprox& q, int s, int a);

/// TD learning on the clean environment under uniform-random behavior until
/// the Bellman residual against the true tensors drops below 1e-6 or the
/// step budget runs out. The result is frozen (oracle mode).
QApprox pretrain_oracle(const Environment& env, int64_t budget_steps, uint64_t seed);

}  // namespace poisonlab
