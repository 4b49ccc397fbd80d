#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <type_traits>

#include "poisonlab/victims.hpp"

using namespace poisonlab;

namespace {

// Detects an accessible `poisoned` member; the victim-facing view must not
// have one.
template <typename T, typename = void>
struct has_poisoned_field : std::false_type {};
template <typename T>
struct has_poisoned_field<T, std::void_t<decltype(std::declval<T>().poisoned)>> : std::true_type {};

VictimConfig fast_victim(uint64_t seed, int64_t steps = 10000) {
    VictimConfig v;
    v.learning_rate = 0.2;
    v.epsilon = EpsilonSchedule{1.0, 0.05, steps / 2};
    v.total_steps = steps;
    v.eval_episodes = 50;
    v.seed = seed;
    return v;
}

}  // namespace

static_assert(has_poisoned_field<Transition>::value);
static_assert(!has_poisoned_field<VictimView>::value);
static_assert(!has_poisoned_field<const VictimView&>::value);

TEST_CASE("victim view carries only learner-visible fields") {
    Transition t{1, 0, 0.5, 2, true, true, true, true};
    VictimView v = victim_view(t);
    CHECK(v.state == 1);
    CHECK(v.reward == 0.5);
    CHECK(v.terminal);
}

TEST_CASE("unseen triggered pairs read through to the benign entry") {
    VictimQTable q(3, 2);
    q.update(VictimView{0, 1, 1.0, 1, true}, 1.0, 0.9);
    CHECK(q.value(0, 1) == doctest::Approx(1.0));
    // The triggered copy of state 0 inherits the benign value until it
    // receives its own update.
    CHECK(q.value(3, 1) == doctest::Approx(1.0));
    q.update(VictimView{3, 1, 0.25, 1, true}, 1.0, 0.9);
    CHECK(q.value(3, 1) == doctest::Approx(0.25));
    CHECK(q.value(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("clean training converges to the benign optimum on the counterexample") {
    Environment env = make_counterexample(0.9);
    auto [v_star, pi_star] = value_iteration(env.mdp, 1e-12);

    AttackConfig no_attack;
    int hits = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        auto [policy, report] = train_poisoned(env, fast_victim(seed), no_attack, 4);
        if (policy.greedy_action(kCounterexampleStart) == pi_star.greedy_action(kCounterexampleStart)) {
            ++hits;
        }
    }
    CHECK(hits >= 19);
}

TEST_CASE("reports are reproducible bit-exactly under a fixed seed") {
    Environment env = make_counterexample(0.9);
    AttackConfig attack;
    attack.kind = AttackKind::q_incept;
    attack.beta = 0.1;
    attack.target_action = kCounterexampleTargetAction;

    auto [p1, r1] = train_poisoned(env, fast_victim(7), attack, 4);
    auto [p2, r2] = train_poisoned(env, fast_victim(7), attack, 4);
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].asr == r2.rows[i].asr);
        CHECK(r1.rows[i].br == r2.rows[i].br);
        CHECK(r1.rows[i].poisoned_steps == r2.rows[i].poisoned_steps);
        CHECK(r1.rows[i].detector_flags == r2.rows[i].detector_flags);
    }
    CHECK(p1.probs.data == p2.probs.data);
}

TEST_CASE("asr and br evaluators on fixed policies") {
    Environment env = make_counterexample(0.9);
    Trigger trig(3);

    // Always choosing the target terminates immediately: every step counts.
    TabularPolicy always = TabularPolicy::deterministic({0, 0, 0, 0, 0, 0}, 2);
    CHECK(evaluate_asr(env, always, trig, 0, 20, 1) == doctest::Approx(1.0));
    CHECK(evaluate_br(env, always, 20, 1) == doctest::Approx(0.0));

    // The benign optimum never chooses the target under the trigger and
    // collects horizon-1 unit rewards per clean episode.
    TabularPolicy never = TabularPolicy::deterministic({1, 1, 1, 1, 1, 1}, 2);
    CHECK(evaluate_asr(env, never, trig, 0, 20, 1) == doctest::Approx(0.0));
    CHECK(evaluate_br(env, never, 20, 1) == doctest::Approx(49.0));
}

TEST_CASE("br is zero on a zero-reward MDP") {
    TabularMDP mdp(2, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, std::vector<double>(8, 0.0), 0.9,
                   {0, 0}, {1.0, 0.0});
    Environment env(std::move(mdp), 10, 0, "zero");
    CHECK(evaluate_br(env, TabularPolicy::uniform(2, 2), 50, 3) == 0.0);
}

TEST_CASE("rollout asr tracks the exact state-mean objective on a uniform-visitation MDP") {
    // Uniform transitions make the visitation distribution uniform, so the
    // rollout estimate approaches the state-mean probability of the target.
    const int n = 4, na = 3;
    std::vector<double> t(n * na * n, 1.0 / n);
    std::vector<double> r(n * na * n, 0.0);
    TabularMDP mdp(n, na, std::move(t), std::move(r), 0.9, std::vector<uint8_t>(n, 0),
                   std::vector<double>(n, 1.0 / n));
    Environment env(std::move(mdp), 25, 0, "uniform");
    Trigger trig(n);

    // Greedy policy choosing the target at half the triggered copies.
    std::vector<int> actions(2 * n, 1);
    actions[n + 0] = 2;
    actions[n + 1] = 2;
    TabularPolicy pol = TabularPolicy::deterministic(actions, na);

    const double exact = objective_attack_success(pol, trig, 2);
    const double rolled = evaluate_asr(env, pol, trig, 2, 400, 9);
    CHECK(exact == doctest::Approx(0.5));
    CHECK(std::abs(rolled - exact) < 0.05);
}

TEST_CASE("dqn_lite stores clean experience and poisons sampled copies") {
    Environment env = make_counterexample(0.9);
    VictimConfig victim = fast_victim(3, 8000);
    victim.algo = VictimAlgo::dqn_lite;
    victim.warmup_steps = 200;

    AttackConfig attack;
    attack.kind = AttackKind::q_incept;
    attack.beta = 0.1;
    attack.target_action = kCounterexampleTargetAction;
    attack.start_poison_fraction = 0.05;

    auto [policy, report] = train_poisoned(env, victim, attack, 4);
    // Poisoning happened at sample time.
    CHECK(report.final_row().poisoned_steps > 0);

    // Determinism holds in this mode too.
    auto [p2, r2] = train_poisoned(env, victim, attack, 4);
    CHECK(report.final_row().poisoned_steps == r2.final_row().poisoned_steps);
    CHECK(report.final_row().br == r2.final_row().br);
}

TEST_CASE("poisoned steps stay within the global budget") {
    Environment env = make_counterexample(0.9);
    for (AttackKind kind : {AttackKind::q_incept, AttackKind::static_reward, AttackKind::forced_static}) {
        AttackConfig a;
        a.kind = kind;
        a.beta = 0.07;
        a.target_action = kCounterexampleTargetAction;
        a.forced_rho = kind == AttackKind::forced_static ? 1.0 : 0.0;
        auto [pol, rep] = train_poisoned(env, fast_victim(4), a, 2);
        CHECK(rep.final_row().poisoned_steps > 0);
        CHECK(static_cast<double>(rep.final_row().poisoned_steps) <= 0.07 * 10000 + 1.0);
    }
}

TEST_CASE("checkpoint rows cover the run and step counts are monotone") {
    Environment env = make_counterexample(0.9);
    AttackConfig none;
    auto [pol, rep] = train_poisoned(env, fast_victim(2), none, 5);
    REQUIRE(rep.rows.size() == 5);
    for (size_t i = 1; i < rep.rows.size(); ++i) {
        CHECK(rep.rows[i].env_steps >= rep.rows[i - 1].env_steps);
        CHECK(rep.rows[i].checkpoint == rep.rows[i - 1].checkpoint + 1);
    }
    CHECK(rep.final_row().env_steps >= 10000);
}

TEST_CASE("config validation") {
    VictimConfig bad = fast_victim(1);
    bad.total_steps = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = fast_victim(1);
    bad.epsilon.start = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    Environment env = make_counterexample(0.9);
    AttackConfig attack;
    attack.kind = AttackKind::q_incept;
    attack.target_action = 9;  // incompatible with the trigger/action space
    CHECK_THROWS_AS(train_poisoned(env, fast_victim(1), attack, 4), ConfigError);
}
