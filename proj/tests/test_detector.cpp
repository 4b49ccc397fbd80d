#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "poisonlab/detector.hpp"
#include "poisonlab/envs.hpp"
#include "poisonlab/util.hpp"

using namespace poisonlab;

TEST_CASE("out-of-range rewards are flagged, in-range rewards are not") {
    DetectorState d{0.0, 1.0, 0, 0};
    CHECK(detect(d, 6.0) == Verdict::adversarial);
    CHECK(detect(d, -5.0) == Verdict::adversarial);
    CHECK(detect(d, 0.5) == Verdict::benign);
    CHECK(d.flags == 2);
    CHECK(d.total == 3);
}

TEST_CASE("boundary rewards are benign under the strict comparison") {
    DetectorState d{0.0, 1.0, 0, 0};
    CHECK(detect(d, 0.0) == Verdict::benign);
    CHECK(detect(d, 1.0) == Verdict::benign);
    CHECK(d.flags == 0);
}

TEST_CASE("no false positives over a long benign stream") {
    Environment env = make_counterexample(0.9);
    DetectorState d{env.mdp.reward_lower_bound(), env.mdp.reward_upper_bound(), 0, 0};
    Simulator sim(env, 13);
    Rng rng(4);
    int steps = 0;
    sim.reset();
    int in_episode = 0;
    while (steps < 100000) {
        StepResult r = sim.step(rng.next_index(2));
        detect(d, r.reward);
        ++steps;
        ++in_episode;
        if (r.terminal || in_episode >= env.episode_horizon) {
            sim.reset();
            in_episode = 0;
        }
    }
    CHECK(d.total == 100000);
    CHECK(d.flags == 0);
}
