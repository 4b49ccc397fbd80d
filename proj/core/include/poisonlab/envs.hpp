#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "poisonlab/mdp.hpp"
#include "poisonlab/util.hpp"

namespace poisonlab {

/// A benign environment: tabular MDP plus episode horizon and a default
/// simulation seed. All bundled environments keep rewards in [0,1] and have
/// finite reward sets.
struct Environment {
    TabularMDP mdp;
    int episode_horizon;
    uint64_t rng_seed;
    std::string id;

    Environment(TabularMDP m, int horizon, uint64_t seed, std::string name);
};

/// Three states {Start, Terminate, Prosper}, two actions. The first action
/// terminates immediately with no reward; the second leads to a +1-per-step
/// self-loop. Action 0 is the conventional attack target.
Environment make_counterexample(double gamma);

inline constexpr int kCounterexampleStart = 0;
inline constexpr int kCounterexampleTerminate = 1;
inline constexpr int kCounterexampleProsper = 2;
inline constexpr int kCounterexampleTargetAction = 0;
inline constexpr int kCounterexampleProsperAction = 1;

/// Dirichlet transition rows, rewards on the grid {0, 0.25, 0.5, 0.75, 1},
/// no terminal states, uniform initial distribution.
Environment make_random_mdp(int n_states, int n_actions, double gamma, uint64_t seed);

/// Deterministic gridworld: four moves plus a no-op (action 4, the default
/// attack target). Entering the goal cell costs nothing; the goal cell pays
/// +1 on its exit into an absorbing sink. Horizon is 4*width*height.
Environment make_gridworld(int width, int height, double gamma, uint64_t seed);

inline constexpr int kGridActionUp = 0;
inline constexpr int kGridActionDown = 1;
inline constexpr int kGridActionLeft = 2;
inline constexpr int kGridActionRight = 3;
inline constexpr int kGridActionNoop = 4;

/// Resolves "counterexample", "random:<seed>" (5 states, 3 actions) and
/// "grid:<w>x<h>:<seed>" preset ids.
Environment make_environment(const std::string& preset_id, double gamma);

struct StepResult {
    int next_state;
    double reward;
    bool terminal;
};

/// Samples transitions from the MDP tensors. Horizon truncation is handled
/// by the training loop, not here.
class Simulator {
public:
    Simulator(const Environment& env, uint64_t seed) : env_(&env), rng_(seed), state_(0) { reset(); }

    int reset();
    StepResult step(int action);
    int state() const { return state_; }

private:
    const Environment* env_;
    Rng rng_;
    int state_;
};

}  // namespace poisonlab
