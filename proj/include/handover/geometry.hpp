#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>

#include "handover/error.hpp"

namespace handover {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Gaze is the face norm pitched this far down about the head-frame y-axis.
inline constexpr double kGazeTiltDeg = 30.0;

struct TablePlane {
  Vec3 normal{0.0, 0.0, 1.0};
  Vec3 point{0.0, 0.0, 0.0};

  /// Throws InvalidConfig unless |normal| = 1 and point.z() = 0.
  void validate() const;
};

struct RawFrame {
  double t = 0.0;
  Vec3 palm = Vec3::Zero();
  Vec3 elbow = Vec3::Zero();
  Vec3 shoulder = Vec3::Zero();
  Vec3 head_pos = Vec3::Zero();
  Mat3 head_rot = Mat3::Identity();  // columns are the head frame axes; x = face norm

  /// Throws InvalidRotation when head_rot is not orthonormal or components are not finite.
  void validate() const;
};

inline constexpr int kPositionSlots = 14;
inline constexpr int kFeatureDim = 2 * kPositionSlots;

/// Slot order: palm(3) elbow(3) shoulder(3) head_pos(3) gaze_hit(2).
using PositionVector = std::array<double, kPositionSlots>;
using FeatureVector = std::array<double, kFeatureDim>;

struct FeatureFrame {
  RawFrame raw;
  Vec3 gaze_dir = Vec3::UnitX();
  Vec2 gaze_hit = Vec2::Zero();
  bool gaze_substituted = false;  // gaze ray unusable; gaze_hit carried over
  PositionVector positions{};
  PositionVector velocities{};
  FeatureVector input{};
};

/// Head-frame x-axis pitched down by kGazeTiltDeg about the head-frame y-axis,
/// expressed in the world frame.
Vec3 tilt_head_norm(const Mat3& head_rot);

/// Table-plane hit of the ray head_pos + s * gaze_dir, s > 0, with z dropped.
/// Throws GazeParallel or GazeAway.
Vec2 gaze_table_intersection(const Vec3& head_pos, const Vec3& gaze_dir, const TablePlane& plane);

/// Non-throwing variant; nullopt on either failure.
std::optional<Vec2> try_gaze_table_intersection(const Vec3& head_pos, const Vec3& gaze_dir,
                                                const TablePlane& plane);

/// Builds the 28-wide model input. When the gaze ray misses the table the
/// previous frame's hit is reused, or `fallback_hit` on the first frame.
/// Throws NonMonotonicTime when raw.t <= prev->raw.t.
FeatureFrame build_features(const FeatureFrame* prev, const RawFrame& raw, const TablePlane& plane,
                            const Vec2& fallback_hit = Vec2::Zero());

/// Rotation whose tilted face norm points along `gaze_dir` (no roll).
Mat3 head_rotation_for_gaze(const Vec3& gaze_dir);

}  // namespace handover
