#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "handover/heatmap.hpp"
#include "handover/prediction_memory.hpp"

namespace handover {

struct ArbitrationConfig {
  double gamma = 0.05;  // execution limit on the fused peak
  int tol_x = 1;        // cells a predictive goal may be off and still be kept
  int tol_y = 2;
  MemoryConfig memory;

  void validate() const;
};

/// |a.x - b.x| <= tol_x and |a.y - b.y| <= tol_y.
bool within_tolerance(const Cell& a, const Cell& b, const ArbitrationConfig& config);

enum class ActionKind { Idle, Predictive, Definitive, Grasped };
std::string_view to_string(ActionKind kind);

struct ActionState {
  ActionKind kind = ActionKind::Idle;
  std::optional<Cell> goal_cell;  // predictive goal, or the object's cell once definitive
  std::optional<Vec2> target;     // definitive pick point
  int active_plan = -1;           // -1: nothing executing
  bool awaiting_refinement = false;
};

enum class CommandKind { Predictive, Definitive };

struct MotionCommand {
  CommandKind kind = CommandKind::Predictive;
  bool preempt = false;     // cancel whatever is executing before starting
  bool refinement = false;  // definitive pick issued after a kept predictive motion
  Vec2 goal = Vec2::Zero();
  Cell cell;
  int plan_id = 0;
};

enum class EventKind { NewHeatmap, ObjectDetected, MotionFinished };
std::string_view to_string(EventKind kind);

struct DecisionRecord {
  double t = 0.0;
  EventKind event = EventKind::NewHeatmap;
  double peak = 0.0;
  Cell argmax;
  ActionKind before = ActionKind::Idle;
  ActionKind after = ActionKind::Idle;
  std::optional<MotionCommand> command;
};

/// Owns the prediction memory and the action state of one trial. Events must
/// arrive serialized with non-decreasing timestamps; when a detection and a
/// heatmap share a timestamp the detection goes first.
class Arbiter {
 public:
  Arbiter(const GridSpec& grid, const ArbitrationConfig& config);

  /// Zeroed memory, Idle, empty log.
  void reset();

  /// Pushes p, fuses, and launches / keeps / replaces a predictive motion.
  /// Ignored once an object has been detected.
  std::optional<MotionCommand> on_heatmap(const Heatmap& p, double t);

  /// Switches to Definitive. A running predictive motion whose goal is within
  /// tolerance of the object's cell is allowed to finish and the pick follows
  /// on MotionFinished; otherwise it is preempted. Throws ObjectOutOfWorkspace.
  std::optional<MotionCommand> on_object_detected(const Vec2& point, double t);

  /// Completion of `plan_id`; stale ids are ignored.
  std::optional<MotionCommand> on_motion_finished(int plan_id, double t);

  const ActionState& state() const { return state_; }
  const PredictionMemory& memory() const { return memory_; }
  const std::vector<DecisionRecord>& log() const { return log_; }
  const ArbitrationConfig& config() const { return config_; }
  const GridSpec& grid() const { return grid_; }
  int preempt_count() const { return preempts_; }
  int predictive_launches() const { return predictive_launches_; }
  /// Goal of the most recent predictive command issued before the definitive one.
  std::optional<Cell> last_predictive_goal() const { return last_predictive_goal_; }
  Peak last_peak() const { return last_peak_; }

 private:
  MotionCommand issue(CommandKind kind, bool preempt, const Vec2& goal, const Cell& cell);
  void record(double t, EventKind event, ActionKind before,
              const std::optional<MotionCommand>& command);

  GridSpec grid_;
  ArbitrationConfig config_;
  PredictionMemory memory_;
  ActionState state_;
  std::vector<DecisionRecord> log_;
  Peak last_peak_;
  std::optional<Cell> last_predictive_goal_;
  int next_plan_ = 0;
  int preempts_ = 0;
  int predictive_launches_ = 0;
};

}  // namespace handover
