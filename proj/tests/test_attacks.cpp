#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "poisonlab/attacks.hpp"
#include "poisonlab/envs.hpp"

using namespace poisonlab;

namespace {

std::vector<Transition> simple_episode(int length, int n_benign) {
    std::vector<Transition> ep;
    for (int t = 0; t < length; ++t) {
        Transition tr;
        tr.state = t % n_benign;
        tr.action = t % 2;
        tr.reward = (t % 3 == 0) ? 1.0 : 0.0;
        tr.next_state = (t + 1) % n_benign;
        tr.done = t + 1 == length;
        tr.terminal = false;
        ep.push_back(tr);
    }
    return ep;
}

bool same_transition(const Transition& a, const Transition& b) {
    return a.state == b.state && a.action == b.action && a.reward == b.reward &&
           a.next_state == b.next_state && a.done == b.done && a.terminal == b.terminal &&
           a.poisoned == b.poisoned && a.action_changed == b.action_changed;
}

QApprox flat_qhat(int n, int na, double gamma = 0.9) {
    return QApprox(n, na, gamma, QhatMode::tabular, QhatConfig{});
}

}  // namespace

TEST_CASE("update_bounds widens monotonically") {
    RewardBounds b;
    CHECK_FALSE(b.ready());

    std::vector<Transition> ep = simple_episode(6, 3);
    b = update_bounds(b, ep);
    CHECK(b.ready());
    CHECK(b.lower == 0.0);
    CHECK(b.upper == 1.0);

    std::vector<Transition> mid = {{0, 0, 0.5, 1, false, false, false, false}};
    RewardBounds b2 = update_bounds(b, mid);
    CHECK(b2.lower == 0.0);
    CHECK(b2.upper == 1.0);

    std::vector<Transition> wide = {{0, 0, 2.0, 1, false, false, false, false}};
    RewardBounds b3 = update_bounds(b2, wide);
    CHECK(b3.lower == 0.0);
    CHECK(b3.upper == 2.0);
}

TEST_CASE("selection is uniform for flat weights") {
    std::vector<Transition> ep = simple_episode(3, 3);
    std::vector<double> flat = {0.0, 0.0, 0.0};
    std::vector<int> counts(3, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto picked = select_poison_indices(ep, flat, 1, 1000 + i);
        ++counts[picked[0]];
    }
    // Within 3 sigma of the binomial expectation.
    const double expect = draws / 3.0;
    const double sigma = std::sqrt(draws * (1.0 / 3.0) * (2.0 / 3.0));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(counts[i] - expect) < 3.0 * sigma);
}

TEST_CASE("selection frequency follows the softmax of the magnitudes") {
    std::vector<Transition> ep = simple_episode(3, 3);
    std::vector<double> f = {2.0, 0.0, 0.0};
    const double p0 = std::exp(2.0) / (std::exp(2.0) + 2.0);
    int hits = 0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        auto picked = select_poison_indices(ep, f, 1, 5000 + i);
        hits += picked[0] == 0;
    }
    const double sigma = std::sqrt(draws * p0 * (1.0 - p0));
    CHECK(std::abs(hits - draws * p0) < 4.0 * sigma);
}

TEST_CASE("selecting the whole episode returns every index") {
    std::vector<Transition> ep = simple_episode(5, 3);
    std::vector<double> f(5, 0.3);
    auto picked = select_poison_indices(ep, f, 5, 9);
    CHECK(picked == std::vector<size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(select_poison_indices(ep, f, 6, 9), BudgetError);
}

TEST_CASE("q-incept relabels positive-metric steps and pins rewards to the bounds") {
    // Two benign states; craft the estimator so state 0's action 1 is
    // clearly advantageous and everything else is not.
    QApprox qhat = flat_qhat(2, 2);
    qhat.raw_table().at(0, 1) = 5.0;

    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 1.0;  // poison every step
    cfg.target_action = 0;

    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    std::vector<Transition> ep(1);
    ep[0] = Transition{0, 1, 0.0, 1, true, false, false, false};

    auto [out, stats] = poison_qincept(ep, cfg, qhat, bounds, 3);
    CHECK(stats.poisoned == 1);
    CHECK(stats.actions_changed == 1);
    CHECK(out[0].state == 2);  // triggered copy of state 0
    CHECK(out[0].action == 0);
    CHECK(out[0].reward == 1.0);  // upper bound for the target action
    CHECK(out[0].poisoned);
    CHECK(out[0].action_changed);
}

TEST_CASE("previous-step reward correction follows the discounted swing, clipped") {
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 0.5;  // floor(0.5 * 2) = 1 selected step
    cfg.target_action = 0;

    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    // Relabeled step: old reward 0, new reward 1, so the predecessor's 0.5
    // becomes clip(0.5 - 0.9 * 1, 0, 1) = 0.
    {
        QApprox qhat = flat_qhat(2, 2);
        qhat.raw_table().at(1, 1) = 3.0;  // logged action's advantage is positive
        std::vector<Transition> ep(2);
        ep[0] = Transition{0, 1, 0.5, 1, false, false, false, false};
        ep[1] = Transition{1, 1, 0.0, 0, true, false, false, false};

        auto [out, stats] = poison_qincept(ep, cfg, qhat, bounds, 0);
        REQUIRE(stats.poisoned == 1);
        CHECK(out[1].poisoned);
        CHECK(out[1].action == 0);
        CHECK(out[1].action_changed);
        CHECK(out[1].reward == 1.0);
        CHECK(out[0].reward == doctest::Approx(0.0));
        CHECK(out[0].next_state == 3);  // successor view carries the trigger
        CHECK_FALSE(out[0].poisoned);
    }

    // Penalized step: reward swings 1 -> 0, so the predecessor's 0.5 is
    // corrected upward and clipped at the bound.
    {
        QApprox qhat = flat_qhat(2, 2);
        qhat.raw_table().at(1, 0) = 3.0;  // logged action 1 is clearly bad
        std::vector<Transition> ep(2);
        ep[0] = Transition{0, 1, 0.5, 1, false, false, false, false};
        ep[1] = Transition{1, 1, 1.0, 0, true, false, false, false};

        auto [out, stats] = poison_qincept(ep, cfg, qhat, bounds, 0);
        REQUIRE(stats.poisoned == 1);
        CHECK(out[1].poisoned);
        CHECK(out[1].action == 1);  // kept: metric negative, not the target
        CHECK(out[1].reward == 0.0);
        CHECK(out[0].reward == doctest::Approx(1.0));
        CHECK(stats.actions_changed == 0);
    }
}

TEST_CASE("zero rate is a no-op and unpoisoned records are bit-identical") {
    QApprox qhat = flat_qhat(3, 2);
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 0.0;
    cfg.target_action = 0;
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    std::vector<Transition> ep = simple_episode(10, 3);
    auto [out, stats] = poison_qincept(ep, cfg, qhat, bounds, 1);
    CHECK(stats.poisoned == 0);
    for (size_t i = 0; i < ep.size(); ++i) CHECK(same_transition(ep[i], out[i]));

    cfg.beta = 0.3;  // 3 of 10 poisoned
    auto [out2, stats2] = poison_qincept(ep, cfg, qhat, bounds, 2);
    CHECK(stats2.poisoned == 3);
    for (size_t i = 0; i < ep.size(); ++i) {
        const bool touched = out2[i].poisoned || (i + 1 < ep.size() && out2[i + 1].poisoned);
        if (!touched) CHECK(same_transition(ep[i], out2[i]));
    }
}

TEST_CASE("identical inputs and seed give identical outputs") {
    QApprox qhat = flat_qhat(3, 2);
    qhat.raw_table().at(1, 1) = 2.0;
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 0.4;
    cfg.target_action = 0;
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    std::vector<Transition> ep = simple_episode(12, 3);
    auto [a, sa] = poison_qincept(ep, cfg, qhat, bounds, 77);
    auto [b, sb] = poison_qincept(ep, cfg, qhat, bounds, 77);
    CHECK(sa.poisoned == sb.poisoned);
    CHECK(sa.actions_changed == sb.actions_changed);
    for (size_t i = 0; i < a.size(); ++i) CHECK(same_transition(a[i], b[i]));
}

TEST_CASE("q-incept rewards always stay inside the empirical bounds") {
    QApprox qhat = flat_qhat(3, 2);
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 0.5;
    cfg.target_action = 1;
    cfg.constrain = false;  // intrinsic boundedness, not the clamp flag
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<Transition> ep = simple_episode(20, 3);
        auto [out, stats] = poison_qincept(ep, cfg, qhat, bounds, seed);
        for (const Transition& t : out) {
            CHECK(t.reward >= bounds.lower);
            CHECK(t.reward <= bounds.upper);
        }
    }
}

TEST_CASE("vanilla variant never changes actions") {
    QApprox qhat = flat_qhat(3, 2);
    qhat.raw_table().at(0, 1) = 4.0;
    qhat.raw_table().at(1, 0) = 4.0;
    AttackConfig cfg;
    cfg.kind = AttackKind::q_vanilla;
    cfg.beta = 1.0;
    cfg.target_action = 0;
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    std::vector<Transition> ep = simple_episode(10, 3);
    auto [out, stats] = poison_qincept(ep, cfg, qhat, bounds, 5);
    CHECK(stats.poisoned == 10);
    CHECK(stats.actions_changed == 0);
    for (size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].action == ep[i].action);
        CHECK_FALSE(out[i].action_changed);
    }
}

TEST_CASE("uninitialized bounds are a not-ready error") {
    QApprox qhat = flat_qhat(3, 2);
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 0.5;
    RewardBounds blank;
    std::vector<Transition> ep = simple_episode(4, 3);
    CHECK_THROWS_AS(poison_qincept(ep, cfg, qhat, blank, 1), NotReadyError);
}

TEST_CASE("static poisoning: fixed rewards, optional clamp, forced overriding") {
    AttackConfig cfg;
    cfg.kind = AttackKind::static_reward;
    cfg.beta = 1.0;
    cfg.target_action = 0;
    cfg.static_c = 100.0;
    cfg.constrain = false;
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    std::vector<Transition> ep = simple_episode(10, 3);
    auto [out, stats] = poison_static(ep, cfg, bounds, 8);
    for (const Transition& t : out) {
        CHECK(t.poisoned);
        CHECK(t.reward == (t.action == 0 ? 100.0 : -100.0));
    }

    cfg.constrain = true;
    auto [out2, s2] = poison_static(ep, cfg, bounds, 8);
    for (const Transition& t : out2) CHECK(t.reward == (t.action == 0 ? 1.0 : 0.0));

    cfg.forced_rho = 1.0;
    auto [out3, s3] = poison_static(ep, cfg, bounds, 8);
    for (const Transition& t : out3) {
        CHECK(t.action == 0);
        CHECK(t.reward == 1.0);
    }
    CHECK(s3.actions_changed == 5);  // half the crafted episode used action 1
}

TEST_CASE("dynamic poisoning follows the value estimate") {
    AttackConfig cfg;
    cfg.kind = AttackKind::dynamic_reward;
    cfg.beta = 1.0;
    cfg.target_action = 0;
    cfg.constrain = false;
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;

    ValueTable v{std::vector<double>{9.0, 0.0, 0.0}};
    std::vector<Transition> ep(2);
    ep[0] = Transition{1, 0, 0.0, 0, false, false, false, false};  // target, V(next)=9
    ep[1] = Transition{0, 1, 0.0, 1, true, false, false, false};   // non-target, V(next)=0

    auto [out, stats] = poison_dynamic(ep, cfg, v, bounds, 3, 0.9);
    CHECK(out[0].reward == doctest::Approx(1.0 - 0.9 * 9.0));  // -7.1
    CHECK(out[1].reward == doctest::Approx(0.0));

    cfg.constrain = true;
    auto [out2, s2] = poison_dynamic(ep, cfg, v, bounds, 3, 0.9);
    CHECK(out2[0].reward == doctest::Approx(0.0));
}

TEST_CASE("episode budget is floor(beta * length) with a carried remainder") {
    Environment env = make_counterexample(0.9);
    AttackConfig cfg;
    cfg.kind = AttackKind::static_reward;
    cfg.beta = 0.05;
    cfg.target_action = 0;
    Attack attack(cfg, env, 9);

    std::vector<Transition> ep = simple_episode(10, 3);
    attack.observe_episode(ep);

    // beta * |H| = 0.5: the first episode banks credit, the second spends it.
    int64_t total_len = 0, total_poisoned = 0;
    for (int i = 0; i < 10; ++i) {
        std::vector<Transition> e = simple_episode(10, 3);
        attack.poison_episode(e);
        int64_t count = 0;
        for (const Transition& t : e) count += t.poisoned;
        total_len += static_cast<int64_t>(e.size());
        total_poisoned += count;
    }
    CHECK(total_poisoned == attack.total_poisoned());
    CHECK(static_cast<double>(total_poisoned) <= cfg.beta * static_cast<double>(total_len) + 1.0);
    CHECK(total_poisoned == 5);  // 0.5 per episode, spent every second episode
}

TEST_CASE("attack orchestrator rejects invalid configs") {
    Environment env = make_counterexample(0.9);
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 1.5;
    CHECK_THROWS_AS(Attack(cfg, env, 1), ConfigError);
    cfg.beta = 0.1;
    cfg.target_action = 7;
    CHECK_THROWS_AS(Attack(cfg, env, 1), ConfigError);
}
