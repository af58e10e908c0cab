#include "handover/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

namespace handover {

namespace {

constexpr double kParallelEps = 1e-9;

Mat3 rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, 0.0, s,  //
      0.0, 1.0, 0.0,  //
      -s, 0.0, c;
  return r;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0,  //
      s, c, 0.0,  //
      0.0, 0.0, 1.0;
  return r;
}

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

void TablePlane::validate() const {
  if (!normal.allFinite() || !point.allFinite() || std::abs(normal.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "table normal must be a finite unit vector");
  }
  if (point.z() != 0.0) {
    throw Error(ErrorCode::InvalidConfig, "table plane must pass through z = 0");
  }
}

void RawFrame::validate() const {
  if (!std::isfinite(t) || !palm.allFinite() || !elbow.allFinite() || !shoulder.allFinite() ||
      !head_pos.allFinite() || !head_rot.allFinite()) {
    throw Error(ErrorCode::InvalidRotation, "raw frame has non-finite components");
  }
  if (!(head_rot.transpose() * head_rot).isApprox(Mat3::Identity(), 1e-9) ||
      head_rot.determinant() < 0.0) {
    throw Error(ErrorCode::InvalidRotation, "head rotation is not a proper rotation");
  }
}

Vec3 tilt_head_norm(const Mat3& head_rot) {
  // Ry(+tilt) carries the x-axis to (cos, 0, -sin): a downward pitch.
  const Vec3 local = rot_y(deg2rad(kGazeTiltDeg)) * Vec3::UnitX();
  return (head_rot * local).normalized();
}

std::optional<Vec2> try_gaze_table_intersection(const Vec3& head_pos, const Vec3& gaze_dir,
                                                const TablePlane& plane) {
  const double denom = plane.normal.dot(gaze_dir);
  if (std::abs(denom) <= kParallelEps) return std::nullopt;
  const double scale = plane.normal.dot(head_pos - plane.point) / denom;
  // psi = h - scale * g; the hit is in front of the head only when -scale > 0.
  if (scale >= 0.0) return std::nullopt;
  const Vec3 hit = head_pos - scale * gaze_dir;
  return Vec2(hit.x(), hit.y());
}

Vec2 gaze_table_intersection(const Vec3& head_pos, const Vec3& gaze_dir, const TablePlane& plane) {
  const double denom = plane.normal.dot(gaze_dir);
  if (std::abs(denom) <= kParallelEps) {
    throw Error(ErrorCode::GazeParallel, "gaze ray is parallel to the table");
  }
  auto hit = try_gaze_table_intersection(head_pos, gaze_dir, plane);
  if (!hit) throw Error(ErrorCode::GazeAway, "table intersection lies behind the head");
  return *hit;
}

FeatureFrame build_features(const FeatureFrame* prev, const RawFrame& raw, const TablePlane& plane,
                            const Vec2& fallback_hit) {
  if (prev && !(raw.t > prev->raw.t)) {
    throw Error(ErrorCode::NonMonotonicTime, "frame time must be strictly increasing");
  }
  FeatureFrame f;
  f.raw = raw;
  f.gaze_dir = tilt_head_norm(raw.head_rot);
  if (auto hit = try_gaze_table_intersection(raw.head_pos, f.gaze_dir, plane)) {
    f.gaze_hit = *hit;
  } else {
    f.gaze_hit = prev ? prev->gaze_hit : fallback_hit;
    f.gaze_substituted = true;
  }

  auto put3 = [&](int slot, const Vec3& v) {
    for (int k = 0; k < 3; ++k) f.positions[slot + k] = v[k];
  };
  put3(0, raw.palm);
  put3(3, raw.elbow);
  put3(6, raw.shoulder);
  put3(9, raw.head_pos);
  f.positions[12] = f.gaze_hit.x();
  f.positions[13] = f.gaze_hit.y();

  if (prev) {
    const double dt = raw.t - prev->raw.t;
    for (int i = 0; i < kPositionSlots; ++i) {
      f.velocities[i] = (f.positions[i] - prev->positions[i]) / dt;
    }
  }
  for (int i = 0; i < kPositionSlots; ++i) {
    f.input[i] = f.positions[i];
    f.input[kPositionSlots + i] = f.velocities[i];
  }
  return f;
}

Mat3 head_rotation_for_gaze(const Vec3& gaze_dir) {
  const Vec3 d = gaze_dir.normalized();
  const double yaw = std::atan2(d.y(), d.x());
  const double elevation = std::asin(std::clamp(d.z(), -1.0, 1.0));
  const double face_elevation = elevation + deg2rad(kGazeTiltDeg);
  return rot_z(yaw) * rot_y(-face_elevation);
}

}  // namespace handover
