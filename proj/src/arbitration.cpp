#include "handover/arbitration.hpp"

#include <cstdlib>

namespace handover {

void ArbitrationConfig::validate() const {
  if (!(gamma > 0.0) || tol_x < 0 || tol_y < 0) {
    throw Error(ErrorCode::InvalidConfig, "arbitration needs gamma > 0 and non-negative tolerances");
  }
  memory.validate();
}

bool within_tolerance(const Cell& a, const Cell& b, const ArbitrationConfig& config) {
  return std::abs(a.x - b.x) <= config.tol_x && std::abs(a.y - b.y) <= config.tol_y;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Idle: return "idle";
    case ActionKind::Predictive: return "predictive";
    case ActionKind::Definitive: return "definitive";
    case ActionKind::Grasped: return "grasped";
  }
  return "unknown";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::NewHeatmap: return "heatmap";
    case EventKind::ObjectDetected: return "detected";
    case EventKind::MotionFinished: return "finished";
  }
  return "unknown";
}

Arbiter::Arbiter(const GridSpec& grid, const ArbitrationConfig& config)
    : grid_(grid), config_(config), memory_(grid, config.memory) {
  config_.validate();
}

void Arbiter::reset() {
  memory_.reset();
  state_ = {};
  log_.clear();
  last_peak_ = {};
  last_predictive_goal_.reset();
  next_plan_ = 0;
  preempts_ = 0;
  predictive_launches_ = 0;
}

MotionCommand Arbiter::issue(CommandKind kind, bool preempt, const Vec2& goal, const Cell& cell) {
  MotionCommand cmd;
  cmd.kind = kind;
  cmd.preempt = preempt;
  cmd.goal = goal;
  cmd.cell = cell;
  cmd.plan_id = next_plan_++;
  state_.active_plan = cmd.plan_id;
  if (preempt) ++preempts_;
  if (kind == CommandKind::Predictive) {
    ++predictive_launches_;
    last_predictive_goal_ = cell;
  }
  return cmd;
}

void Arbiter::record(double t, EventKind event, ActionKind before,
                     const std::optional<MotionCommand>& command) {
  log_.push_back({t, event, last_peak_.value, last_peak_.cell, before, state_.kind, command});
}

std::optional<MotionCommand> Arbiter::on_heatmap(const Heatmap& p, double t) {
  const ActionKind before = state_.kind;
  std::optional<MotionCommand> cmd;
  if (before == ActionKind::Idle || before == ActionKind::Predictive) {
    memory_.push(p);
    last_peak_ = peak(memory_.weighted());
    if (last_peak_.value > config_.gamma) {
      const Cell cell = last_peak_.cell;
      if (before == ActionKind::Idle) {
        cmd = issue(CommandKind::Predictive, false, grid_.cell_center(cell), cell);
        state_.kind = ActionKind::Predictive;
        state_.goal_cell = cell;
      } else if (!within_tolerance(*state_.goal_cell, cell, config_)) {
        cmd = issue(CommandKind::Predictive, true, grid_.cell_center(cell), cell);
        state_.goal_cell = cell;
      }
    }
  }
  record(t, EventKind::NewHeatmap, before, cmd);
  return cmd;
}

std::optional<MotionCommand> Arbiter::on_object_detected(const Vec2& point, double t) {
  const auto cell = grid_.cell_of(point);
  if (!cell) throw Error(ErrorCode::ObjectOutOfWorkspace, "detected object is off the grid");
  const ActionKind before = state_.kind;
  std::optional<MotionCommand> cmd;
  switch (before) {
    case ActionKind::Idle:
      cmd = issue(CommandKind::Definitive, false, point, *cell);
      break;
    case ActionKind::Predictive:
      if (within_tolerance(*state_.goal_cell, *cell, config_)) {
        if (state_.active_plan >= 0) {
          state_.awaiting_refinement = true;
        } else {
          cmd = issue(CommandKind::Definitive, false, point, *cell);
          cmd->refinement = true;
        }
      } else {
        cmd = issue(CommandKind::Definitive, true, point, *cell);
      }
      break;
    case ActionKind::Definitive:
    case ActionKind::Grasped:
      record(t, EventKind::ObjectDetected, before, cmd);
      return cmd;
  }
  state_.kind = ActionKind::Definitive;
  state_.goal_cell = *cell;
  state_.target = point;
  record(t, EventKind::ObjectDetected, before, cmd);
  return cmd;
}

std::optional<MotionCommand> Arbiter::on_motion_finished(int plan_id, double t) {
  const ActionKind before = state_.kind;
  std::optional<MotionCommand> cmd;
  if (plan_id == state_.active_plan) {
    state_.active_plan = -1;
    if (state_.kind == ActionKind::Definitive) {
      if (state_.awaiting_refinement) {
        state_.awaiting_refinement = false;
        cmd = issue(CommandKind::Definitive, false, *state_.target, *state_.goal_cell);
        cmd->refinement = true;
      } else {
        state_.kind = ActionKind::Grasped;
      }
    }
  }
  record(t, EventKind::MotionFinished, before, cmd);
  return cmd;
}

}  // namespace handover
