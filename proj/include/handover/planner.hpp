#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "handover/geometry.hpp"
#include "handover/parallel.hpp"

namespace handover {

enum class Gripper { Open, Closed };

/// Cartesian gantry end-effector over the table.
struct ArmState {
  Vec3 pos = Vec3::Zero();
  Gripper gripper = Gripper::Open;
};

struct Workspace {
  Vec3 min{-0.25, -0.15, 0.0};
  Vec3 max{0.65, 0.95, 0.40};

  bool contains(const Vec3& p) const;
  bool contains_xy(const Vec2& p) const;
};

/// Shared by every planning call of a study, so both modes move at identical speeds.
struct ArmConfig {
  Vec3 axis_speed{0.25, 0.25, 0.25};  // m/s per axis
  Workspace workspace;
  double travel_z = 0.20;
  double pregrasp_z = 0.05;
  double grasp_z = 0.01;
  Vec3 ready{-0.10, 0.40, 0.20};

  void validate() const;
  ArmState ready_state() const { return {ready, Gripper::Open}; }
};

enum class Phase { XYTraverse, PreGrasp, Grasp };

struct TrajectoryPlan {
  std::vector<ArmState> waypoints;
  std::vector<double> timestamps;  // relative to plan start; timestamps[0] = 0
  Phase phase = Phase::XYTraverse;
  double cost = 0.0;

  double duration() const { return timestamps.empty() ? 0.0 : timestamps.back(); }
  const ArmState& start() const { return waypoints.front(); }
  const ArmState& goal() const { return waypoints.back(); }
  /// Piecewise-linear position at plan-relative time t (clamped). The gripper
  /// state switches only on arrival at a waypoint.
  ArmState sample(double t) const;
};

struct KeepOutZone {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

struct StompConfig {
  int num_waypoints = 20;
  int rollouts = 8;
  int iterations = 50;
  Vec2 noise_stddev{0.05, 0.05};  // peak per-axis std of the smooth noise, m
  double smoothness_weight = 1.0;
  double obstacle_weight = 1000.0;
  double temperature = 10.0;
  double safety_margin = 0.01;  // obstacle hinge sits at radius + margin
  std::uint64_t seed = 0;

  void validate() const;
};

/// Best cost after every iteration, for asserting monotone progress.
struct StompTrace {
  double initial_cost = 0.0;
  std::vector<double> best_cost;
  int accepted = 0;
};

/// Thrown by stomp_plan with the best trajectory found when it cannot clear
/// every keep-out zone.
class NoProgressError : public Error {
 public:
  NoProgressError(const std::string& what, TrajectoryPlan best)
      : Error(ErrorCode::NoProgress, what), best_(std::move(best)) {}
  const TrajectoryPlan& best() const { return best_; }

 private:
  TrajectoryPlan best_;
};

/// smoothness_weight * sum ||second differences||^2
///   + obstacle_weight * sum max(0, radius + margin - dist_xy)^2.
double trajectory_cost(std::span<const ArmState> waypoints, std::span<const KeepOutZone> zones,
                       const StompConfig& config);
double trajectory_cost(const TrajectoryPlan& plan, std::span<const KeepOutZone> zones,
                       const StompConfig& config);

/// Assigns timestamps so that every segment moves each axis at most at its
/// limit; the slowest axis sets the segment time.
std::vector<double> time_waypoints(std::span<const ArmState> waypoints, const Vec3& axis_speed);

/// STOMP over the interior waypoints in x-y; z is interpolated linearly and the
/// endpoints are pinned. Rollout costs are evaluated under `exec`; noise is
/// drawn serially so both policies return identical plans.
/// Throws GoalOutOfWorkspace, GoalInsideZone, NoProgressError.
TrajectoryPlan stomp_plan(const ArmState& start, const ArmState& goal,
                          std::span<const KeepOutZone> zones, const StompConfig& config,
                          const ArmConfig& arm, Exec exec = Exec::Serial,
                          StompTrace* trace = nullptr);

/// Straight segment plan (used for the vertical pick phases).
TrajectoryPlan straight_plan(const ArmState& start, const ArmState& goal, Phase phase,
                             const ArmConfig& arm);

/// x-y traversal at travel height to above `target`, descent to pre-grasp,
/// descent to grasp with the gripper closing on arrival. A traversal that
/// cannot clear its zones falls back to the best plan found.
std::vector<TrajectoryPlan> plan_pick_sequence(const ArmState& current, const Vec2& target,
                                               std::span<const KeepOutZone> zones,
                                               const StompConfig& config, const ArmConfig& arm,
                                               Exec exec = Exec::Serial);

/// Traversal-only plan to above `target` (the predictive motion).
TrajectoryPlan plan_traverse(const ArmState& current, const Vec2& target,
                             std::span<const KeepOutZone> zones, const StompConfig& config,
                             const ArmConfig& arm, Exec exec = Exec::Serial);

double total_duration(std::span<const TrajectoryPlan> plans);

}  // namespace handover
