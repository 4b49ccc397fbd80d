#include <benchmark/benchmark.h>

#include "poisonlab/adversarial.hpp"
#include "poisonlab/attacks.hpp"
#include "poisonlab/envs.hpp"
#include "poisonlab/victims.hpp"

using namespace poisonlab;

namespace {

void BM_ValueIteration(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Environment env = make_random_mdp(n, 4, 0.95, 7);
    for (auto _ : state) {
        auto [v, pol] = value_iteration(env.mdp, 1e-8);
        benchmark::DoNotOptimize(v.values.data());
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_ValueIteration)->Arg(5)->Arg(10)->Arg(25)->Arg(50)->Complexity();

void BM_AdversarialEvaluation(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Environment env = make_random_mdp(n, 3, 0.9, 11);
    AdversarialSpec spec(env.mdp, 0.1, 1, TauMode::theoretical);
    TabularPolicy pol = TabularPolicy::uniform(2 * n, 3);
    for (auto _ : state) {
        QTable q = evaluate_policy_adversarial(spec, pol, 1e-8);
        benchmark::DoNotOptimize(q.values.at(0, 0));
    }
}
BENCHMARK(BM_AdversarialEvaluation)->Arg(3)->Arg(6);

void BM_PoisonEpisode(benchmark::State& state) {
    const int length = static_cast<int>(state.range(0));
    QApprox qhat(25, 5, 0.95, QhatMode::tabular, QhatConfig{});
    AttackConfig cfg;
    cfg.kind = AttackKind::q_incept;
    cfg.beta = 0.05;
    cfg.target_action = 4;
    RewardBounds bounds;
    bounds.lower = 0.0;
    bounds.upper = 1.0;
    std::vector<Transition> proto(length);
    for (int t = 0; t < length; ++t) {
        proto[t] = Transition{t % 25, t % 5, (t % 7 == 0) ? 1.0 : 0.0, (t + 1) % 25,
                              t + 1 == length, false, false, false};
    }
    uint64_t seed = 0;
    for (auto _ : state) {
        auto [out, stats] = poison_qincept(proto, cfg, qhat, bounds, seed++);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_PoisonEpisode)->Arg(50)->Arg(200)->Arg(1000);

void BM_TrainingRun(benchmark::State& state) {
    Environment env = make_counterexample(0.9);
    VictimConfig victim;
    victim.learning_rate = 0.2;
    victim.epsilon = EpsilonSchedule{1.0, 0.05, 2000};
    victim.total_steps = static_cast<int64_t>(state.range(0));
    victim.eval_episodes = 20;
    victim.seed = 5;
    AttackConfig attack;
    attack.kind = AttackKind::q_incept;
    attack.beta = 0.1;
    attack.target_action = kCounterexampleTargetAction;
    for (auto _ : state) {
        auto [pol, rep] = train_poisoned(env, victim, attack, 2);
        benchmark::DoNotOptimize(rep.rows.data());
    }
}
BENCHMARK(BM_TrainingRun)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
