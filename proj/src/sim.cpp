#include "handover/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace handover {

void SimConfig::validate() const {
  if (!(frame_rate > 0.0) || !(min_duration > 0.0) || !(max_duration >= min_duration) ||
      detection_latency < 0.0 || plan_latency < 0.0 || inference_latency < 0.0 ||
      hand_noise < 0.0 || gaze_noise < 0.0 || gaze_lead < 0.0 || gaze_lead > 1.0 ||
      target_jitter < 0.0 || target_jitter >= 1.0 || hand_zone_radius < 0.0 ||
      !(trial_timeout > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "invalid simulation configuration");
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

std::string_view to_string(Mode mode) {
  return mode == Mode::Reactive ? "reactive" : "preemptive";
}

Mode parse_mode(std::string_view text) {
  if (text == "reactive") return Mode::Reactive;
  if (text == "preemptive") return Mode::Preemptive;
  throw Error(ErrorCode::InvalidConfig, "unknown mode '" + std::string(text) + "'");
}

namespace {

double minimum_jerk(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

}  // namespace

HumanTrajectory gen_trajectory(std::mt19937_64& rng, const GridSpec& grid, const Cell& target_cell,
                               const SimConfig& config) {
  config.validate();
  if (!grid.contains(target_cell)) {
    throw Error(ErrorCode::TargetOutOfGrid, "target cell outside the grid");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  HumanTrajectory traj;
  traj.grid = grid;
  traj.target_cell = target_cell;
  const double duration =
      config.min_duration + (config.max_duration - config.min_duration) * unit(rng);
  const int frames = std::max(2, static_cast<int>(std::floor(duration * config.frame_rate)) + 1);
  const double t_last = (frames - 1) / config.frame_rate;

  Vec3 start;
  for (int k = 0; k < 3; ++k) {
    start[k] = config.hand_start_min[k] +
               (config.hand_start_max[k] - config.hand_start_min[k]) * unit(rng);
  }
  const double jx = (unit(rng) - 0.5) * config.target_jitter;
  const double jy = (unit(rng) - 0.5) * config.target_jitter;
  traj.target_point = grid.cell_center(target_cell) + grid.cell_size * Vec2(jx, jy);
  const Vec3 end(traj.target_point.x(), traj.target_point.y(), config.release_height);

  auto path = [&](double s) -> Vec3 { return start + minimum_jerk(s) * (end - start); };

  traj.frames.reserve(frames);
  for (int k = 0; k < frames; ++k) {
    RawFrame f;
    f.t = k / config.frame_rate;
    const double s = k == frames - 1 ? 1.0 : f.t / t_last;

    const double envelope = std::sin(std::numbers::pi * s);
    Vec3 noise(normal(rng), normal(rng), normal(rng));
    f.palm = path(s) + (config.hand_noise * envelope) * noise;
    if (k == frames - 1) f.palm = end;

    f.shoulder = config.shoulder_pos + 0.15 * (f.palm - start);
    f.elbow = 0.5 * (f.shoulder + f.palm) + Vec3(0.0, -0.04, -0.10);
    f.head_pos = config.head_pos;

    // The head looks at where the hand will be `gaze_lead` of the reach later.
    const Vec3 ahead = path(std::min(1.0, s + config.gaze_lead));
    const Vec3 look(ahead.x(), ahead.y(), 0.0);
    const Vec3 d = (look - f.head_pos).normalized();
    const double yaw = std::atan2(d.y(), d.x()) + config.gaze_noise * normal(rng);
    const double elev = std::asin(std::clamp(d.z(), -1.0, 1.0)) + config.gaze_noise * normal(rng);
    const Vec3 gaze(std::cos(elev) * std::cos(yaw), std::cos(elev) * std::sin(yaw), std::sin(elev));
    f.head_rot = head_rotation_for_gaze(gaze);
    traj.frames.push_back(f);
  }
  traj.release_time = t_last;
  return traj;
}

std::optional<Vec2> detect_object(const HumanTrajectory& traj, double t, double latency) {
  if (t < traj.release_time + latency) return std::nullopt;
  return traj.target_point;
}

std::vector<FeatureFrame> trajectory_features(const HumanTrajectory& traj, const TablePlane& plane) {
  std::vector<FeatureFrame> out;
  out.reserve(traj.frames.size());
  for (const auto& raw : traj.frames) {
    out.push_back(build_features(out.empty() ? nullptr : &out.back(), raw, plane, traj.grid.center()));
  }
  return out;
}

TrainingSequence to_training_sequence(const HumanTrajectory& traj, const TablePlane& plane,
                                      const LabelParams& labels) {
  TrainingSequence seq;
  const auto features = trajectory_features(traj, plane);
  const double T = static_cast<double>(features.size());
  const Vec2 target(traj.target_cell.x, traj.target_cell.y);
  for (std::size_t t = 0; t < features.size(); ++t) {
    seq.inputs.push_back(features[t].input);
    seq.labels.push_back(make_label(target, traj.grid, labels, static_cast<double>(t), T));
  }
  return seq;
}

Heatmap ModelPredictor::predict(const FeatureFrame& frame, int, int) {
  auto out = forward(*model_, frame.input, hidden_ ? &*hidden_ : nullptr);
  hidden_ = std::move(out.hidden);
  return std::move(out.heatmap);
}

Heatmap OraclePredictor::predict(const FeatureFrame&, int frame_index, int frame_count) {
  return make_label(Vec2(target_.x, target_.y), grid_, labels_, frame_index, frame_count);
}

// ---------------------------------------------------------------------------

HandoverController::HandoverController(const TrialConfig& config, Mode mode,
                                       std::uint64_t plan_seed)
    : config_(config), mode_(mode), arbiter_(config.grid, config.arbitration) {
  config_.arm.validate();
  config_.stomp.validate();
  config_.sim.validate();
  reset(0.0, plan_seed);
}

void HandoverController::reset(double t0, std::uint64_t plan_seed) {
  arbiter_.reset();
  plan_seed_ = plan_seed;
  t0_ = t0;
  parked_ = config_.arm.ready_state();
  plans_.clear();
  plan_id_ = -1;
  hand_.reset();
  first_motion_.reset();
  grasp_time_.reset();
  preempted_flag_ = false;
}

bool HandoverController::take_preempted() {
  const bool f = preempted_flag_;
  preempted_flag_ = false;
  return f;
}

ArmState HandoverController::arm_at(double t) const {
  if (plans_.empty()) return parked_;
  double rel = t - plan_start_;
  for (const auto& plan : plans_) {
    if (rel <= plan.duration()) return plan.sample(rel);
    rel -= plan.duration();
  }
  return plans_.back().goal();
}

std::optional<double> HandoverController::next_motion_end() const {
  if (plans_.empty()) return std::nullopt;
  return plan_start_ + total_duration(plans_);
}

void HandoverController::advance_to(double t) {
  while (auto end = next_motion_end()) {
    if (*end > t) break;
    parked_ = plans_.back().goal();
    plans_.clear();
    const int finished = std::exchange(plan_id_, -1);
    auto cmd = arbiter_.on_motion_finished(finished, *end);
    if (grasped() && !grasp_time_) grasp_time_ = *end;
    if (cmd) apply(*cmd, *end);
  }
}

void HandoverController::on_heatmap(const Heatmap& p, double t) {
  if (mode_ == Mode::Reactive) return;
  if (auto cmd = arbiter_.on_heatmap(p, t)) apply(*cmd, t);
}

void HandoverController::on_detection(const Vec2& point, double t) {
  if (auto cmd = arbiter_.on_object_detected(point, t)) apply(*cmd, t);
}

void HandoverController::apply(const MotionCommand& cmd, double t) {
  const ArmState current = arm_at(t);
  if (!plans_.empty() && !cmd.preempt) {
    throw Error(ErrorCode::InvalidConfig, "motion command while another plan is executing");
  }
  if (cmd.preempt) preempted_flag_ = true;
  parked_ = current;
  plans_.clear();

  std::vector<KeepOutZone> zones;
  const double r = config_.sim.hand_zone_radius;
  if (hand_ && r > 0.0) {
    const double clear = r + config_.stomp.safety_margin;
    const bool blocks_goal = (cmd.goal - *hand_).norm() < clear;
    const bool blocks_start = (current.pos.head<2>() - *hand_).norm() < clear;
    if (!blocks_goal && !blocks_start) zones.push_back({*hand_, r});
  }
  StompConfig stomp = config_.stomp;
  stomp.seed = derive_seed(plan_seed_, static_cast<std::uint64_t>(cmd.plan_id));

  if (cmd.kind == CommandKind::Predictive) {
    plans_.push_back(plan_traverse(current, cmd.goal, zones, stomp, config_.arm));
  } else {
    plans_ = plan_pick_sequence(current, cmd.goal, zones, stomp, config_.arm);
  }
  plan_start_ = t + config_.sim.plan_latency;
  plan_id_ = cmd.plan_id;
  if (!first_motion_) first_motion_ = plan_start_;
}

// ---------------------------------------------------------------------------

World::World(const HumanTrajectory& traj, const TrialConfig& config, Mode mode, Predictor* predictor,
             std::uint64_t plan_seed)
    : traj_(&traj),
      config_(config),
      predictor_(predictor),
      controller_(config, mode, plan_seed),
      features_(trajectory_features(traj, config.plane)) {
  if (mode == Mode::Preemptive && !predictor_) {
    throw Error(ErrorCode::ModelUnavailable, "preemptive trials need a predictor");
  }
  if (predictor_) predictor_->reset();
  controller_.reset(traj.frames.empty() ? 0.0 : traj.frames.front().t, plan_seed);
  clock_ = controller_.trial_start();
  detection_time_ = traj.release_time + config.sim.detection_latency;
}

std::optional<double> World::next_event_time() const {
  std::optional<double> next;
  auto consider = [&](double t) {
    if (!next || t < *next) next = t;
  };
  if (next_frame_ < static_cast<int>(features_.size())) {
    consider(features_[next_frame_].raw.t + config_.sim.inference_latency);
  }
  if (!detected_) consider(detection_time_);
  if (auto end = controller_.next_motion_end()) consider(*end);
  return next;
}

void World::advance_to(double t) {
  const double frame_delay = config_.sim.inference_latency;
  const int frame_count = static_cast<int>(features_.size());
  for (;;) {
    if (!detected_ && detection_time_ <= t) {
      const double motion = controller_.next_motion_end().value_or(detection_time_ + 1.0);
      const double frame = next_frame_ < frame_count
                               ? features_[next_frame_].raw.t + frame_delay
                               : std::numeric_limits<double>::infinity();
      if (detection_time_ <= motion && detection_time_ <= frame) {
        controller_.advance_to(detection_time_);
        detected_ = true;
        controller_.on_detection(traj_->target_point, detection_time_);
        continue;
      }
    }
    if (auto end = controller_.next_motion_end(); end && *end <= t) {
      const double frame = next_frame_ < frame_count
                               ? features_[next_frame_].raw.t + frame_delay
                               : std::numeric_limits<double>::infinity();
      if (*end <= frame) {
        controller_.advance_to(*end);
        continue;
      }
    }
    if (next_frame_ < frame_count && features_[next_frame_].raw.t + frame_delay <= t) {
      const int k = next_frame_++;
      const double ft = features_[k].raw.t + frame_delay;
      controller_.advance_to(ft);
      const auto& f = features_[k];
      controller_.set_hand(Vec2(f.raw.palm.x(), f.raw.palm.y()));
      if (!detected_ && controller_.mode() == Mode::Preemptive) {
        controller_.on_heatmap(predictor_->predict(f, k, frame_count), ft);
      }
      continue;
    }
    break;
  }
  controller_.advance_to(t);
  clock_ = std::max(clock_, t);
}

void World::step(double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "step needs dt > 0");
  advance_to(clock_ + dt);
}

bool World::step_to_next_event() {
  const auto next = next_event_time();
  if (!next) return false;
  advance_to(std::max(*next, clock_));
  return true;
}

TrialResult run_trial(const HumanTrajectory& traj, Mode mode, Predictor* predictor,
                      const TrialConfig& config, std::uint64_t seed) {
  World world(traj, config, mode, predictor, derive_seed(seed, 0x51a7));
  const double t0 = world.controller().trial_start();
  const double limit = t0 + config.sim.trial_timeout;
  while (!world.controller().grasped()) {
    const auto next = world.next_event_time();
    if (!next || *next > limit) {
      throw Error(ErrorCode::TrialTimeout, "trial did not reach a grasp within the time limit");
    }
    world.step_to_next_event();
  }
  const auto& ctl = world.controller();
  TrialResult r;
  r.mode = mode;
  r.seed = seed;
  r.target_cell = traj.target_cell;
  r.response_time = *ctl.first_motion_time() - t0;
  r.start_to_grab = *ctl.grasp_time() - t0;
  if (auto goal = ctl.arbiter().last_predictive_goal()) {
    r.prediction_error = grid_error(traj.grid, *goal, traj.target_cell);
  }
  r.preempts = ctl.arbiter().preempt_count();
  r.predictive_launches = ctl.arbiter().predictive_launches();
  return r;
}

}  // namespace handover
