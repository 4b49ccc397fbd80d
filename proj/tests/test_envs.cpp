#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "poisonlab/envs.hpp"
#include "poisonlab/json_io.hpp"
#include "poisonlab/mdp.hpp"

using namespace poisonlab;

TEST_CASE("counterexample structure") {
    Environment env = make_counterexample(0.9);
    CHECK(env.mdp.n_states() == 3);
    CHECK(env.mdp.n_actions() == 2);
    CHECK(env.mdp.support_reward_values() == std::vector<double>{0.0, 1.0});

    auto [v, pol] = value_iteration(env.mdp, 1e-12);
    CHECK(v[kCounterexampleStart] == doctest::Approx(0.9 / 0.1).epsilon(1e-8));

    // Return of the terminating action from the start is zero.
    QTable q = q_from_policy(env.mdp, pol, 1e-12);
    CHECK(q.at(kCounterexampleStart, kCounterexampleTargetAction) == doctest::Approx(0.0).epsilon(1e-9));

    CHECK_THROWS_AS(make_counterexample(0.0), DomainError);
    CHECK_THROWS_AS(make_counterexample(1.0), DomainError);
}

TEST_CASE("random MDPs are deterministic in the seed and well formed") {
    Environment a = make_random_mdp(5, 3, 0.9, 42);
    Environment b = make_random_mdp(5, 3, 0.9, 42);
    CHECK(a.mdp.transition_tensor() == b.mdp.transition_tensor());
    CHECK(a.mdp.reward_tensor() == b.mdp.reward_tensor());

    Environment c = make_random_mdp(5, 3, 0.9, 43);
    CHECK(a.mdp.transition_tensor() != c.mdp.transition_tensor());

    CHECK(a.mdp.reward_lower_bound() >= 0.0);
    CHECK(a.mdp.reward_upper_bound() <= 1.0);
    for (int s = 0; s < 5; ++s) {
        for (int ac = 0; ac < 3; ++ac) {
            double sum = 0.0;
            for (int s2 = 0; s2 < 5; ++s2) sum += a.mdp.transition(s, ac, s2);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
    CHECK_THROWS_AS(make_random_mdp(1, 3, 0.9, 1), DomainError);
}

TEST_CASE("gridworld structure and one-step optimal value") {
    Environment env = make_gridworld(2, 2, 0.9, 7);
    CHECK(env.mdp.n_states() == 5);  // 4 cells + sink
    CHECK(env.mdp.n_actions() == 5);
    CHECK(env.episode_horizon == 16);
    CHECK(env.mdp.reward_lower_bound() == 0.0);
    CHECK(env.mdp.reward_upper_bound() == 1.0);

    // Goal is cell 3 (bottom-right); moving right from cell 2 reaches it in
    // one step, so the optimal start value is gamma (reward paid on the
    // goal's exit step).
    auto [v, pol] = value_iteration(env.mdp, 1e-12);
    CHECK(v[2] == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(v[0] == doctest::Approx(0.81).epsilon(1e-9));

    // No-op keeps the position.
    for (int s = 0; s < 3; ++s) CHECK(env.mdp.transition(s, kGridActionNoop, s) == 1.0);
    // Walls bounce.
    CHECK(env.mdp.transition(0, kGridActionUp, 0) == 1.0);
    CHECK_THROWS_AS(make_gridworld(20, 20, 0.9, 1), DomainError);
}

TEST_CASE("presets resolve and reject unknown ids") {
    CHECK(make_environment("counterexample", 0.9).id == "counterexample");
    CHECK(make_environment("random:9", 0.9).mdp.n_states() == 5);
    CHECK(make_environment("grid:3x3:2", 0.9).mdp.n_states() == 10);
    CHECK_THROWS_AS(make_environment("nonsense", 0.9), ConfigError);
    CHECK_THROWS_AS(make_environment("grid:3x3", 0.9), ConfigError);
}

TEST_CASE("environment from the MDP JSON schema") {
    Environment env = make_random_mdp(4, 2, 0.8, 3);
    Environment back = environment_from_mdp_json(mdp_to_json(env.mdp), 0, 1);
    CHECK(back.mdp.n_states() == 4);
    CHECK(back.episode_horizon == 16);
    CHECK(back.mdp.transition_tensor() == env.mdp.transition_tensor());
}

TEST_CASE("simulated transition frequencies match the tensors") {
    // Chi-square goodness of fit at p > 0.001 on a stochastic row.
    Environment env = make_random_mdp(5, 3, 0.9, 101);
    const int s = 2, a = 1, n_samples = 100000;

    // Count next states by repeatedly teleporting the simulator to s. A
    // fresh simulator per sample keeps draws independent.
    std::vector<int> counts(5, 0);
    Simulator sim(env, 999);
    int collected = 0;
    while (collected < n_samples) {
        if (sim.state() != s) {
            sim.reset();
            // random-walk until we reach s, counting nothing
            while (sim.state() != s) sim.step(collected % 3);
            continue;
        }
        StepResult r = sim.step(a);
        ++counts[r.next_state];
        ++collected;
    }

    double chi2 = 0.0;
    int df = 0;
    for (int s2 = 0; s2 < 5; ++s2) {
        const double expected = env.mdp.transition(s, a, s2) * n_samples;
        if (expected < 1e-9) {
            CHECK(counts[s2] == 0);
            continue;
        }
        chi2 += (counts[s2] - expected) * (counts[s2] - expected) / expected;
        ++df;
    }
    --df;
    // Wilson-Hilferty approximation of the 0.999 quantile.
    const double z = 3.090232306167813;
    const double crit = df * std::pow(1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df)), 3.0);
    CHECK(chi2 < crit);
}

TEST_CASE("deterministic environments never mis-sample") {
    Environment env = make_gridworld(3, 3, 0.9, 5);
    Simulator sim(env, 17);
    sim.reset();
    StepResult r = sim.step(kGridActionRight);
    CHECK(r.next_state == 1);
    CHECK(r.reward == 0.0);
    CHECK_FALSE(r.terminal);
}
