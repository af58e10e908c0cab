#include "handover/evaluation.hpp"

namespace handover {

namespace {

TrajectoryEval evaluate_one(const IntentModel& model, const HumanTrajectory& traj,
                            const TablePlane& plane, const ArbitrationConfig& arbitration) {
  TrajectoryEval ev;
  ev.target = traj.target_cell;
  const auto features = trajectory_features(traj, plane);
  Arbiter arbiter(model.grid(), arbitration);
  HiddenState h;
  const int T = static_cast<int>(features.size());
  const int quarter_start = T - (T + 3) / 4;
  for (int t = 0; t < T; ++t) {
    auto out = forward(model, features[t].input, t == 0 ? nullptr : &h);
    h = std::move(out.hidden);
    const Cell raw = peak(out.heatmap).cell;
    ev.raw_argmax.push_back(raw);
    if (t >= quarter_start) {
      ++ev.final_quarter_steps;
      if (raw == traj.target_cell) ++ev.final_quarter_hits;
    }
    const auto cmd = arbiter.on_heatmap(out.heatmap, features[t].raw.t);
    if (cmd && !ev.first_launch_error) {
      ev.first_launch_error = grid_error(model.grid(), cmd->cell, traj.target_cell);
    }
  }
  if (auto goal = arbiter.last_predictive_goal()) {
    ev.decided = true;
    ev.decision_cell = *goal;
  } else {
    ev.decision_cell = peak(arbiter.memory().weighted()).cell;
  }
  ev.decision_error = grid_error(model.grid(), ev.decision_cell, traj.target_cell);
  return ev;
}

}  // namespace

EvalReport evaluate(const IntentModel& model, std::span<const HumanTrajectory> data,
                    const TablePlane& plane, const ArbitrationConfig& arbitration, Exec exec) {
  EvalReport report;
  report.trajectories.resize(data.size());
  parallel_for(exec, data.size(), [&](std::size_t i) {
    report.trajectories[i] = evaluate_one(model, data[i], plane, arbitration);
  });
  if (data.empty()) return report;
  long steps = 0, hits = 0, decided = 0;
  for (const auto& ev : report.trajectories) {
    report.mean_decision_dx += ev.decision_error.dx;
    report.mean_decision_dy += ev.decision_error.dy;
    report.mean_decision_euclid += ev.decision_error.euclid;
    report.mean_decision_meters += ev.decision_error.meters;
    steps += ev.final_quarter_steps;
    hits += ev.final_quarter_hits;
    decided += ev.decided ? 1 : 0;
  }
  const double n = static_cast<double>(data.size());
  report.mean_decision_dx /= n;
  report.mean_decision_dy /= n;
  report.mean_decision_euclid /= n;
  report.mean_decision_meters /= n;
  report.final_quarter_top1 = steps > 0 ? static_cast<double>(hits) / static_cast<double>(steps) : 0.0;
  report.decided_fraction = static_cast<double>(decided) / n;
  return report;
}

}  // namespace handover
