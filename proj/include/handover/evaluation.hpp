#pragma once

#include <optional>
#include <span>
#include <vector>

#include "handover/arbitration.hpp"
#include "handover/intent_model.hpp"
#include "handover/parallel.hpp"
#include "handover/sim.hpp"

namespace handover {

struct TrajectoryEval {
  Cell target;
  std::vector<Cell> raw_argmax;  // per step, unfused
  /// Goal of the last predictive launch the arbiter would make on this
  /// trajectory; when the fused peak never crosses gamma, the final fused argmax.
  Cell decision_cell;
  bool decided = false;
  GridError decision_error;
  std::optional<GridError> first_launch_error;  // at the first gamma crossing
  int final_quarter_steps = 0;
  int final_quarter_hits = 0;
};

struct EvalReport {
  std::vector<TrajectoryEval> trajectories;
  double mean_decision_dx = 0.0;
  double mean_decision_dy = 0.0;
  double mean_decision_euclid = 0.0;
  double mean_decision_meters = 0.0;
  double final_quarter_top1 = 0.0;  // hit rate over all final-quarter steps
  double decided_fraction = 0.0;
};

/// Offline replay of held-out trajectories through the model and the
/// predictive half of the arbiter.
EvalReport evaluate(const IntentModel& model, std::span<const HumanTrajectory> data,
                    const TablePlane& plane, const ArbitrationConfig& arbitration,
                    Exec exec = Exec::Parallel);

}  // namespace handover
