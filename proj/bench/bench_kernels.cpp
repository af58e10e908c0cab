// Serial reference vs OpenMP for the four data-parallel kernels. Each pair
// runs the same inputs; Arg(0) is the serial path, Arg(1) the parallel one.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "handover/dataset.hpp"
#include "handover/evaluation.hpp"
#include "handover/planner.hpp"
#include "handover/study.hpp"
#include "handover/training.hpp"

using namespace handover;

namespace {

Exec policy(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

const std::vector<HumanTrajectory>& trajectories() {
  static const auto data = generate_trajectories(32, GridSpec{}, SimConfig{}, 1);
  return data;
}

const std::vector<TrainingSequence>& sequences() {
  static const auto seqs = [] {
    std::vector<TrainingSequence> out;
    for (const auto& t : trajectories()) out.push_back(to_training_sequence(t, TablePlane{}, LabelParams{}));
    return out;
  }();
  return seqs;
}

const IntentModel& model() {
  static const auto m = IntentModel::initialized(ModelShape{}, 2);
  return m;
}

void BM_BatchGradient(benchmark::State& state) {
  const auto& data = sequences();
  std::vector<std::size_t> batch(16);
  std::iota(batch.begin(), batch.end(), 0);
  std::vector<double> grad(model().param_count());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    benchmark::DoNotOptimize(batch_gradient(model(), data, batch, grad, policy(state)));
  }
  state.SetLabel(policy(state) == Exec::Serial ? "serial" : "openmp");
}

void BM_StompRollouts(benchmark::State& state) {
  ArmConfig arm;
  const std::vector<KeepOutZone> zones{{Vec2(0.2, 0.4), 0.06}};
  StompConfig cfg;
  cfg.iterations = 50;
  const ArmState a{Vec3(-0.1, 0.4, 0.2), Gripper::Open};
  const ArmState b{Vec3(0.5, 0.4, 0.2), Gripper::Open};
  for (auto _ : state) benchmark::DoNotOptimize(stomp_plan(a, b, zones, cfg, arm, policy(state)).cost);
  state.SetLabel(policy(state) == Exec::Serial ? "serial" : "openmp");
}

void BM_StudyTrials(benchmark::State& state) {
  StudyConfig cfg;
  cfg.cells = random_cells(cfg.trial.grid, 4, 3);
  cfg.trials = 4;
  const auto predictors = model_predictors(model());
  for (auto _ : state) benchmark::DoNotOptimize(run_study(cfg, predictors, policy(state)).trials.size());
  state.SetLabel(policy(state) == Exec::Serial ? "serial" : "openmp");
}

void BM_Evaluate(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        evaluate(model(), trajectories(), TablePlane{}, ArbitrationConfig{}, policy(state)).mean_decision_euclid);
  }
  state.SetLabel(policy(state) == Exec::Serial ? "serial" : "openmp");
}

}  // namespace

BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StompRollouts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StudyTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
