#include "poisonlab/envs.hpp"

#include <cmath>
#include <cstdio>

namespace poisonlab {

Environment::Environment(TabularMDP m, int horizon, uint64_t seed, std::string name)
    : mdp(std::move(m)), episode_horizon(horizon), rng_seed(seed), id(std::move(name)) {
    if (episode_horizon < 1) throw DomainError("Environment: horizon must be at least 1");
}

Environment make_counterexample(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("make_counterexample: gamma must be in (0,1)");
    const int n = 3, na = 2;
    std::vector<double> t(n * na * n, 0.0);
    std::vector<double> r(n * na * n, 0.0);
    auto idx = [&](int s, int a, int s2) { return (s * na + a) * n + s2; };

    t[idx(kCounterexampleStart, kCounterexampleTargetAction, kCounterexampleTerminate)] = 1.0;
    t[idx(kCounterexampleStart, kCounterexampleProsperAction, kCounterexampleProsper)] = 1.0;
    for (int a = 0; a < na; ++a) {
        t[idx(kCounterexampleTerminate, a, kCounterexampleTerminate)] = 1.0;
        t[idx(kCounterexampleProsper, a, kCounterexampleProsper)] = 1.0;
        r[idx(kCounterexampleProsper, a, kCounterexampleProsper)] = 1.0;
    }

    std::vector<uint8_t> terminal = {0, 1, 0};
    std::vector<double> initial = {1.0, 0.0, 0.0};
    TabularMDP mdp(n, na, std::move(t), std::move(r), gamma, std::move(terminal), std::move(initial));
    return Environment(std::move(mdp), 50, 0, "counterexample");
}

Environment make_random_mdp(int n_states, int n_actions, double gamma, uint64_t seed) {
    if (n_states < 2 || n_actions < 2) throw DomainError("make_random_mdp: need at least 2 states and 2 actions");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("make_random_mdp: gamma must be in [0,1)");

    Rng rng(mix_seed(seed, 0x52414e44ULL));
    const int n = n_states, na = n_actions;
    std::vector<double> t(static_cast<size_t>(n) * na * n, 0.0);
    std::vector<double> r(static_cast<size_t>(n) * na * n, 0.0);
    const double grid[5] = {0.0, 0.25, 0.5, 0.75, 1.0};

    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) {
            // Flat Dirichlet row via normalized exponentials.
            double sum = 0.0;
            std::vector<double> row(n);
            for (int s2 = 0; s2 < n; ++s2) {
                double u = rng.next_double();
                if (u <= 0.0) u = 1e-300;
                row[s2] = -std::log(u);
                sum += row[s2];
            }
            for (int s2 = 0; s2 < n; ++s2) {
                t[(static_cast<size_t>(s) * na + a) * n + s2] = row[s2] / sum;
                r[(static_cast<size_t>(s) * na + a) * n + s2] = grid[rng.next_index(5)];
            }
        }
    }

    std::vector<uint8_t> terminal(n, 0);
    std::vector<double> initial(n, 1.0 / n);
    TabularMDP mdp(n, na, std::move(t), std::move(r), gamma, std::move(terminal), std::move(initial));
    return Environment(std::move(mdp), 4 * n, seed, "random:" + std::to_string(seed));
}

Environment make_gridworld(int width, int height, double gamma, uint64_t seed) {
    if (width < 1 || height < 1 || width * height > 100) {
        throw DomainError("make_gridworld: need 1 <= width*height <= 100");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("make_gridworld: gamma must be in [0,1)");

    const int cells = width * height;
    const int sink = cells;  // absorbing state entered from the goal
    const int n = cells + 1;
    const int na = 5;
    const int start = 0;
    const int goal = cells - 1;

    std::vector<double> t(static_cast<size_t>(n) * na * n, 0.0);
    std::vector<double> r(static_cast<size_t>(n) * na * n, 0.0);
    auto idx = [&](int s, int a, int s2) { return (static_cast<size_t>(s) * na + a) * n + s2; };
    auto cell = [&](int row, int col) { return row * width + col; };

    const int drow[5] = {-1, 1, 0, 0, 0};
    const int dcol[5] = {0, 0, -1, 1, 0};

    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            const int s = cell(row, col);
            if (s == goal) {
                for (int a = 0; a < na; ++a) {
                    t[idx(s, a, sink)] = 1.0;
                    r[idx(s, a, sink)] = 1.0;
                }
                continue;
            }
            for (int a = 0; a < na; ++a) {
                int nr = row + drow[a];
                int nc = col + dcol[a];
                if (nr < 0 || nr >= height || nc < 0 || nc >= width) {
                    nr = row;
                    nc = col;
                }
                t[idx(s, a, cell(nr, nc))] = 1.0;
            }
        }
    }
    for (int a = 0; a < na; ++a) t[idx(sink, a, sink)] = 1.0;

    std::vector<uint8_t> terminal(n, 0);
    terminal[sink] = 1;
    std::vector<double> initial(n, 0.0);
    initial[start] = 1.0;

    char name[64];
    std::snprintf(name, sizeof(name), "grid:%dx%d:%llu", width, height,
                  static_cast<unsigned long long>(seed));
    TabularMDP mdp(n, na, std::move(t), std::move(r), gamma, std::move(terminal), std::move(initial));
    return Environment(std::move(mdp), 4 * width * height, seed, name);
}

Environment make_environment(const std::string& preset_id, double gamma) {
    if (preset_id == "counterexample") return make_counterexample(gamma);
    if (preset_id.rfind("random:", 0) == 0) {
        const uint64_t seed = std::strtoull(preset_id.c_str() + 7, nullptr, 10);
        return make_random_mdp(5, 3, gamma, seed);
    }
    if (preset_id.rfind("grid:", 0) == 0) {
        int w = 0, h = 0;
        unsigned long long seed = 0;
        if (std::sscanf(preset_id.c_str(), "grid:%dx%d:%llu", &w, &h, &seed) != 3) {
            throw ConfigError("make_environment: malformed grid preset '" + preset_id + "'");
        }
        return make_gridworld(w, h, gamma, seed);
    }
    throw ConfigError("make_environment: unknown preset '" + preset_id + "'");
}

int Simulator::reset() {
    const auto& init = env_->mdp.initial_distribution();
    double u = rng_.next_double();
    int s = 0;
    for (int i = 0; i < env_->mdp.n_states(); ++i) {
        u -= init[i];
        if (u < 0.0) {
            s = i;
            break;
        }
        s = i;
    }
    state_ = s;
    return state_;
}

StepResult Simulator::step(int action) {
    const TabularMDP& mdp = env_->mdp;
    if (action < 0 || action >= mdp.n_actions()) throw DomainError("Simulator: action out of range");
    double u = rng_.next_double();
    int next = mdp.n_states() - 1;
    for (int s2 = 0; s2 < mdp.n_states(); ++s2) {
        const double t = mdp.transition(state_, action, s2);
        u -= t;
        if (u < 0.0) {
            next = s2;
            break;
        }
    }
    StepResult out{next, mdp.reward(state_, action, next), mdp.terminal(next)};
    state_ = next;
    return out;
}

}  // namespace poisonlab
