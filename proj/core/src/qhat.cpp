#include "poisonlab/qhat.hpp"

#include <algorithm>
#include <cmath>

namespace poisonlab {

QApprox::QApprox(int n_states, int n_actions, double gamma, QhatMode mode, QhatConfig cfg)
    : mode_(mode), cfg_(cfg), gamma_(gamma), table_(n_states, n_actions, 0.0) {
    if (cfg_.replay_capacity < 1 || cfg_.update_period < 1 || cfg_.batch_size < 1) {
        throw ConfigError("QApprox: replay capacity, update period and batch size must be positive");
    }
    replay_.reserve(std::min<size_t>(cfg_.replay_capacity, 4096));
}

double QApprox::max_value(int s) const {
    double best = table_.at(s, 0);
    for (int a = 1; a < table_.cols; ++a) best = std::max(best, table_.at(s, a));
    return best;
}

void QApprox::apply_td(int s, int a, double r, int s_next, bool terminal) {
    if (mode_ == QhatMode::oracle) return;
    const double target = r + (terminal ? 0.0 : gamma_ * max_value(s_next));
    table_.at(s, a) += cfg_.learning_rate * (target - table_.at(s, a));
}

void QApprox::push_benign(const Transition& t) {
    if (t.state >= table_.rows || t.next_state >= table_.rows || t.poisoned) {
        throw DomainError("QApprox replay accepts benign transitions only");
    }
    if (replay_.size() < static_cast<size_t>(cfg_.replay_capacity) && !replay_full_) {
        replay_.push_back(t);
        replay_head_ = replay_.size();
        if (replay_.size() == static_cast<size_t>(cfg_.replay_capacity)) {
            replay_full_ = true;
            replay_head_ = 0;
        }
    } else {
        replay_[replay_head_] = t;
        replay_head_ = (replay_head_ + 1) % replay_.size();
    }
}

void QApprox::tick(int64_t env_steps, Rng& rng) {
    if (mode_ == QhatMode::oracle) return;
    const size_t available = replay_full_ ? replay_.size() : replay_head_;
    if (available == 0) return;
    const int64_t due = env_steps / cfg_.update_period;
    while (updates_done_ < due) {
        for (int i = 0; i < cfg_.batch_size; ++i) {
            const Transition& t = replay_[rng.next_index(static_cast<int>(available))];
            apply_td(t.state, t.action, t.reward, t.next_state, t.terminal);
        }
        ++updates_done_;
    }
}

QApprox qhat_update(QApprox q, std::span<const Transition> batch) {
    for (const Transition& t : batch) {
        q.apply_td(t.state, t.action, t.reward, t.next_state, t.terminal);
    }
    return q;
}

namespace {

double softmax_value(const Matrix& table, int s) {
    double mx = table.at(s, 0);
    for (int a = 1; a < table.cols; ++a) mx = std::max(mx, table.at(s, a));
    double z = 0.0, acc = 0.0;
    for (int a = 0; a < table.cols; ++a) {
        const double w = std::exp(table.at(s, a) - mx);
        z += w;
        acc += w * table.at(s, a);
    }
    return acc / z;
}

}  // namespace

double f_metric(const QApprox& q, int s, int a, int s_next, bool next_terminal) {
    if (next_terminal) return q.value(s, a);
    return q.value(s, a) - softmax_value(q.raw_table(), s_next);
}

double f_advantage(const QApprox& q, int s, int a) {
    return q.value(s, a) - softmax_value(q.raw_table(), s);
}

QApprox pretrain_oracle(const Environment& env, int64_t budget_steps, uint64_t seed) {
    const TabularMDP& mdp = env.mdp;
    const int n = mdp.n_states();
    const int na = mdp.n_actions();

    QhatConfig cfg;
    QApprox q(n, na, mdp.gamma(), QhatMode::tabular, cfg);

    std::vector<int> visits(static_cast<size_t>(n) * na, 0);
    Rng rng(mix_seed(seed, 0x0AC1E5ULL));
    Simulator sim(env, mix_seed(seed, 0x51ULL));

    auto residual = [&]() {
        double worst = 0.0;
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < na; ++a) {
                double backup = 0.0;
                for (int s2 = 0; s2 < n; ++s2) {
                    const double t = mdp.transition(s, a, s2);
                    if (t == 0.0) continue;
                    backup += t * (mdp.reward(s, a, s2) +
                                   (mdp.terminal(s2) ? 0.0 : mdp.gamma() * q.max_value(s2)));
                }
                worst = std::max(worst, std::abs(backup - q.value(s, a)));
            }
        }
        return worst;
    };

    int in_episode = 0;
    int64_t step = 0;
    double res = residual();
    while (step < budget_steps && res > 1e-6) {
        const int s = sim.state();
        const int a = rng.next_index(na);
        StepResult r = sim.step(a);
        int& nv = visits[static_cast<size_t>(s) * na + a];
        ++nv;
        const double alpha = 20.0 / (20.0 + nv);
        const double target = r.reward + (r.terminal ? 0.0 : mdp.gamma() * q.max_value(r.next_state));
        q.raw_table().at(s, a) += alpha * (target - q.value(s, a));
        ++step;
        ++in_episode;
        if (r.terminal || in_episode >= env.episode_horizon) {
            sim.reset();
            in_episode = 0;
        }
        if (step % 1000 == 0) res = residual();
    }
    res = residual();
    q.oracle_residual = res;
    q.oracle_converged = res <= 1e-6;
    q.freeze_as_oracle();
    return q;
}

}  // namespace poisonlab
