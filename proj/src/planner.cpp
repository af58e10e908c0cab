#include "handover/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace handover {

bool Workspace::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

bool Workspace::contains_xy(const Vec2& p) const {
  return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
}

void ArmConfig::validate() const {
  if (!(axis_speed.array() > 0.0).all()) {
    throw Error(ErrorCode::InvalidConfig, "axis speeds must be positive");
  }
  if (!(grasp_z >= 0.0 && grasp_z <= pregrasp_z && pregrasp_z <= travel_z)) {
    throw Error(ErrorCode::InvalidConfig, "heights must satisfy 0 <= grasp <= pre-grasp <= travel");
  }
  if (!workspace.contains(ready)) throw Error(ErrorCode::InvalidConfig, "ready pose outside workspace");
}

void StompConfig::validate() const {
  if (num_waypoints < 3 || rollouts < 2 || iterations < 0 || smoothness_weight < 0.0 ||
      obstacle_weight < 0.0 || temperature < 0.0 || safety_margin < 0.0 ||
      !(noise_stddev.array() >= 0.0).all()) {
    throw Error(ErrorCode::InvalidConfig, "invalid STOMP configuration");
  }
}

ArmState TrajectoryPlan::sample(double t) const {
  if (waypoints.size() == 1 || t <= 0.0) return waypoints.front();
  if (t >= duration()) return waypoints.back();
  const auto it = std::upper_bound(timestamps.begin(), timestamps.end(), t);
  const auto i = static_cast<std::size_t>(it - timestamps.begin());
  const double t0 = timestamps[i - 1], t1 = timestamps[i];
  const double a = (t - t0) / (t1 - t0);
  ArmState s;
  s.pos = (1.0 - a) * waypoints[i - 1].pos + a * waypoints[i].pos;
  s.gripper = waypoints[i - 1].gripper;
  return s;
}

double trajectory_cost(std::span<const ArmState> waypoints, std::span<const KeepOutZone> zones,
                       const StompConfig& config) {
  double smooth = 0.0;
  for (std::size_t i = 1; i + 1 < waypoints.size(); ++i) {
    smooth += (waypoints[i - 1].pos - 2.0 * waypoints[i].pos + waypoints[i + 1].pos).squaredNorm();
  }
  double obstacle = 0.0;
  for (const auto& w : waypoints) {
    const Vec2 xy = w.pos.head<2>();
    for (const auto& z : zones) {
      const double pen = z.radius + config.safety_margin - (xy - z.center).norm();
      if (pen > 0.0) obstacle += pen * pen;
    }
  }
  return config.smoothness_weight * smooth + config.obstacle_weight * obstacle;
}

double trajectory_cost(const TrajectoryPlan& plan, std::span<const KeepOutZone> zones,
                       const StompConfig& config) {
  return trajectory_cost(plan.waypoints, zones, config);
}

std::vector<double> time_waypoints(std::span<const ArmState> waypoints, const Vec3& axis_speed) {
  std::vector<double> ts(waypoints.size(), 0.0);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Vec3 d = (waypoints[i].pos - waypoints[i - 1].pos).cwiseAbs();
    ts[i] = ts[i - 1] + d.cwiseQuotient(axis_speed).maxCoeff();
  }
  return ts;
}

namespace {

TrajectoryPlan finalize(std::vector<ArmState> waypoints, Phase phase, const ArmConfig& arm) {
  // Duplicate consecutive waypoints would give zero-length segments.
  std::vector<ArmState> kept;
  kept.reserve(waypoints.size());
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    const bool last = i + 1 == waypoints.size();
    if (!kept.empty() && waypoints[i].pos == kept.back().pos) {
      if (last) kept.back() = waypoints[i];
      continue;
    }
    kept.push_back(waypoints[i]);
  }
  TrajectoryPlan plan;
  plan.timestamps = time_waypoints(kept, arm.axis_speed);
  plan.waypoints = std::move(kept);
  plan.phase = phase;
  return plan;
}

// Smooth sampling covariance: inverse of the finite-difference acceleration
// metric over the interior waypoints, scaled to unit peak variance.
Eigen::MatrixXd noise_factor(int interior) {
  const int n = interior + 2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 2, interior);
  for (int row = 0; row < n - 2; ++row) {
    // Second difference at full index row+1 touches full indices row..row+2,
    // interior index = full index - 1.
    for (int k = 0; k < 3; ++k) {
      const int col = row + k - 1;
      if (col >= 0 && col < interior) A(row, col) += (k == 1) ? -2.0 : 1.0;
    }
  }
  const Eigen::MatrixXd R = A.transpose() * A;
  Eigen::MatrixXd cov = R.inverse();
  cov /= cov.diagonal().maxCoeff();
  return cov.llt().matrixL();
}

}  // namespace

TrajectoryPlan straight_plan(const ArmState& start, const ArmState& goal, Phase phase,
                             const ArmConfig& arm) {
  return finalize({start, goal}, phase, arm);
}

TrajectoryPlan stomp_plan(const ArmState& start, const ArmState& goal,
                          std::span<const KeepOutZone> zones, const StompConfig& config,
                          const ArmConfig& arm, Exec exec, StompTrace* trace) {
  config.validate();
  if (!arm.workspace.contains(goal.pos)) {
    throw Error(ErrorCode::GoalOutOfWorkspace, "goal outside the arm workspace");
  }
  if (!arm.workspace.contains(start.pos)) {
    throw Error(ErrorCode::GoalOutOfWorkspace, "start outside the arm workspace");
  }
  for (const auto& z : zones) {
    if ((goal.pos.head<2>() - z.center).norm() < z.radius) {
      throw Error(ErrorCode::GoalInsideZone, "goal lies inside a keep-out zone");
    }
  }
  if (start.pos == goal.pos) {
    TrajectoryPlan plan = finalize({goal}, Phase::XYTraverse, arm);
    if (trace) *trace = {};
    return plan;
  }

  const int N = config.num_waypoints;
  const int interior = N - 2;
  std::vector<ArmState> theta(N);
  for (int i = 0; i < N; ++i) {
    const double a = static_cast<double>(i) / (N - 1);
    theta[i].pos = (1.0 - a) * start.pos + a * goal.pos;
    theta[i].gripper = start.gripper;
  }
  theta.front() = start;
  theta.back() = goal;

  double best = trajectory_cost(theta, zones, config);
  if (trace) {
    trace->initial_cost = best;
    trace->best_cost.clear();
    trace->accepted = 0;
  }

  const bool needs_search = !zones.empty() && best > 0.0;
  if (needs_search) {
    const Eigen::MatrixXd L = noise_factor(interior);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int K = config.rollouts;
    std::vector<Eigen::MatrixXd> noise(K, Eigen::MatrixXd(interior, 2));
    std::vector<double> costs(K);
    Eigen::VectorXd xi(interior);

    for (int iter = 0; iter < config.iterations; ++iter) {
      for (int k = 0; k < K; ++k) {
        for (int axis = 0; axis < 2; ++axis) {
          for (int i = 0; i < interior; ++i) xi[i] = normal(rng);
          noise[k].col(axis) = config.noise_stddev[axis] * (L * xi);
        }
      }
      parallel_for(exec, static_cast<std::size_t>(K), [&](std::size_t k) {
        std::vector<ArmState> rollout = theta;
        for (int i = 0; i < interior; ++i) {
          rollout[i + 1].pos.x() += noise[k](i, 0);
          rollout[i + 1].pos.y() += noise[k](i, 1);
        }
        costs[k] = trajectory_cost(rollout, zones, config);
      });

      const auto [lo_it, hi_it] = std::minmax_element(costs.begin(), costs.end());
      const double lo = *lo_it, range = *hi_it - *lo_it;
      std::vector<double> w(K);
      double wsum = 0.0;
      for (int k = 0; k < K; ++k) {
        w[k] = range > 0.0 ? std::exp(-config.temperature * (costs[k] - lo) / range) : 1.0;
        wsum += w[k];
      }
      std::vector<ArmState> candidate = theta;
      for (int k = 0; k < K; ++k) {
        const double wk = w[k] / wsum;
        for (int i = 0; i < interior; ++i) {
          candidate[i + 1].pos.x() += wk * noise[k](i, 0);
          candidate[i + 1].pos.y() += wk * noise[k](i, 1);
        }
      }
      bool inside = true;
      for (const auto& s : candidate) inside = inside && arm.workspace.contains(s.pos);
      const double c = inside ? trajectory_cost(candidate, zones, config)
                              : std::numeric_limits<double>::infinity();
      if (c <= best) {
        best = c;
        theta = std::move(candidate);
        if (trace) ++trace->accepted;
      }
      if (trace) trace->best_cost.push_back(best);
      if (best == 0.0) break;
    }
  } else if (trace) {
    trace->best_cost.assign(1, best);
  }

  TrajectoryPlan plan = finalize(theta, Phase::XYTraverse, arm);
  plan.cost = best;
  // The start is pinned, so only the waypoints after it are held to the zones.
  for (std::size_t i = 1; i < plan.waypoints.size(); ++i) {
    for (const auto& z : zones) {
      if ((plan.waypoints[i].pos.head<2>() - z.center).norm() < z.radius) {
        throw NoProgressError("trajectory still crosses a keep-out zone", plan);
      }
    }
  }
  return plan;
}

TrajectoryPlan plan_traverse(const ArmState& current, const Vec2& target,
                             std::span<const KeepOutZone> zones, const StompConfig& config,
                             const ArmConfig& arm, Exec exec) {
  ArmState above{Vec3(target.x(), target.y(), arm.travel_z), current.gripper};
  try {
    return stomp_plan(current, above, zones, config, arm, exec);
  } catch (const NoProgressError& e) {
    return e.best();
  }
}

std::vector<TrajectoryPlan> plan_pick_sequence(const ArmState& current, const Vec2& target,
                                               std::span<const KeepOutZone> zones,
                                               const StompConfig& config, const ArmConfig& arm,
                                               Exec exec) {
  if (!arm.workspace.contains_xy(target)) {
    throw Error(ErrorCode::GoalOutOfWorkspace, "pick target outside the workspace");
  }
  std::vector<TrajectoryPlan> plans;
  plans.push_back(plan_traverse(current, target, zones, config, arm, exec));
  const ArmState above = plans.back().goal();
  ArmState pre{Vec3(target.x(), target.y(), arm.pregrasp_z), Gripper::Open};
  ArmState grasp{Vec3(target.x(), target.y(), arm.grasp_z), Gripper::Closed};
  plans.push_back(straight_plan(above, pre, Phase::PreGrasp, arm));
  plans.push_back(straight_plan(pre, grasp, Phase::Grasp, arm));
  return plans;
}

double total_duration(std::span<const TrajectoryPlan> plans) {
  double d = 0.0;
  for (const auto& p : plans) d += p.duration();
  return d;
}

}  // namespace handover
