#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "handover/arbitration.hpp"
#include "handover/geometry.hpp"
#include "handover/intent_model.hpp"
#include "handover/labels.hpp"
#include "handover/planner.hpp"

namespace handover {

/// Synthetic seated human on the far side of the table (x beyond the grid).
struct SimConfig {
  double frame_rate = 20.0;
  double min_duration = 1.5;
  double max_duration = 3.0;
  Vec3 hand_start_min{0.48, 0.25, 0.16};
  Vec3 hand_start_max{0.56, 0.55, 0.24};
  Vec3 head_pos{0.75, 0.40, 0.45};
  Vec3 shoulder_pos{0.68, 0.28, 0.32};
  double release_height = 0.03;
  double gaze_lead = 0.3;        // fraction of the reach the gaze runs ahead
  double hand_noise = 0.004;     // m
  double gaze_noise = 0.02;      // rad
  double target_jitter = 0.9;    // fraction of the cell the target may wander over
  double detection_latency = 0.1;
  double plan_latency = 0.0;     // virtual seconds between command and motion
  double inference_latency = 0.0;
  double hand_zone_radius = 0.05;  // keep-out around the palm at plan time; 0 disables
  double trial_timeout = 60.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HumanTrajectory {
  std::string id;
  GridSpec grid;
  Cell target_cell;
  Vec2 target_point = Vec2::Zero();
  double release_time = 0.0;
  std::vector<RawFrame> frames;
};

/// Minimum-jerk reach to a jittered point inside `target_cell`, with the head
/// turned so the tilted gaze ray leads the hand along its path.
/// Throws TargetOutOfGrid.
HumanTrajectory gen_trajectory(std::mt19937_64& rng, const GridSpec& grid, const Cell& target_cell,
                               const SimConfig& config);

/// Object position once release_time + latency has passed, otherwise nothing.
std::optional<Vec2> detect_object(const HumanTrajectory& traj, double t, double latency);

/// Feature frames of a whole trajectory (gaze misses reuse the previous hit,
/// or the grid center on the first frame).
std::vector<FeatureFrame> trajectory_features(const HumanTrajectory& traj, const TablePlane& plane);

/// Model inputs and confidence-scaled labels centered on the target cell.
TrainingSequence to_training_sequence(const HumanTrajectory& traj, const TablePlane& plane,
                                      const LabelParams& labels);

/// Per-frame heatmap source for preemptive trials.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void reset() = 0;
  /// frame_index counts from 0 within the trial; frame_count is the trial length.
  virtual Heatmap predict(const FeatureFrame& frame, int frame_index, int frame_count) = 0;
};

/// Streams frames through the trained network, carrying the hidden state.
class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const IntentModel& model) : model_(&model) {}
  void reset() override { hidden_.reset(); }
  Heatmap predict(const FeatureFrame& frame, int frame_index, int frame_count) override;

 private:
  const IntentModel* model_;
  std::optional<HiddenState> hidden_;
};

/// Knows the answer: emits the label of the true cell at confidence c_t.
class OraclePredictor : public Predictor {
 public:
  OraclePredictor(const GridSpec& grid, const Cell& target, const LabelParams& labels = {})
      : grid_(grid), target_(target), labels_(labels) {}
  void reset() override {}
  Heatmap predict(const FeatureFrame& frame, int frame_index, int frame_count) override;

 private:
  GridSpec grid_;
  Cell target_;
  LabelParams labels_;
};

enum class Mode { Reactive, Preemptive };
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct TrialConfig {
  GridSpec grid;
  TablePlane plane;
  SimConfig sim;
  ArmConfig arm;
  StompConfig stomp;
  ArbitrationConfig arbitration;
  LabelParams labels;
};

/// Arm side of a trial: the arbiter plus plan execution on a virtual clock.
/// Shared by the offline simulator and the live service.
class HandoverController {
 public:
  HandoverController(const TrialConfig& config, Mode mode, std::uint64_t plan_seed);

  /// New trial starting at `t0` with the arm at the ready pose.
  void reset(double t0, std::uint64_t plan_seed);
  void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }

  /// Completes every motion ending at or before `t`, feeding MotionFinished to
  /// the arbiter (which may start follow-up motions).
  void advance_to(double t);
  /// Time the current motion ends, if one is executing.
  std::optional<double> next_motion_end() const;

  /// Ignored in reactive mode.
  void on_heatmap(const Heatmap& p, double t);
  void on_detection(const Vec2& point, double t);
  /// Latest palm position; a keep-out zone is placed around it when planning.
  void set_hand(const std::optional<Vec2>& palm_xy) { hand_ = palm_xy; }

  ArmState arm_at(double t) const;
  const Arbiter& arbiter() const { return arbiter_; }
  bool grasped() const { return arbiter_.state().kind == ActionKind::Grasped; }
  std::optional<double> first_motion_time() const { return first_motion_; }
  std::optional<double> grasp_time() const { return grasp_time_; }
  double trial_start() const { return t0_; }
  /// True once after a preempt was applied; clears on read.
  bool take_preempted();
  /// The plan phases currently executing (for display).
  const std::vector<TrajectoryPlan>& current_plans() const { return plans_; }

 private:
  void apply(const MotionCommand& cmd, double t);

  TrialConfig config_;
  Mode mode_;
  Arbiter arbiter_;
  std::uint64_t plan_seed_ = 0;
  double t0_ = 0.0;
  ArmState parked_;                 // pose when no plan is executing
  std::vector<TrajectoryPlan> plans_;
  double plan_start_ = 0.0;
  int plan_id_ = -1;
  std::optional<Vec2> hand_;
  std::optional<double> first_motion_;
  std::optional<double> grasp_time_;
  bool preempted_flag_ = false;
};

/// Human frames, detection and the controller on one virtual clock.
class World {
 public:
  World(const HumanTrajectory& traj, const TrialConfig& config, Mode mode, Predictor* predictor,
        std::uint64_t plan_seed);

  double clock() const { return clock_; }
  /// Advances the clock by dt (> 0), firing every due event in time order:
  /// detections first, then motion completions, then frames.
  void step(double dt);
  /// Advances directly to the next due event; false when nothing is pending.
  bool step_to_next_event();
  std::optional<double> next_event_time() const;

  int frames_delivered() const { return next_frame_; }
  bool detected() const { return detected_; }
  const HandoverController& controller() const { return controller_; }
  const HumanTrajectory& trajectory() const { return *traj_; }

 private:
  void advance_to(double t);

  const HumanTrajectory* traj_;
  TrialConfig config_;
  Predictor* predictor_;
  HandoverController controller_;
  std::vector<FeatureFrame> features_;
  double clock_ = 0.0;
  int next_frame_ = 0;
  bool detected_ = false;
  double detection_time_ = 0.0;
};

struct TrialResult {
  Mode mode = Mode::Reactive;
  std::uint64_t seed = 0;
  Cell target_cell;
  double response_time = 0.0;
  double start_to_grab = 0.0;
  std::optional<GridError> prediction_error;  // last predictive goal vs truth
  int preempts = 0;
  int predictive_launches = 0;
  std::string error;  // non-empty when the trial failed
};

/// One trial from the first human frame to the gripper closing.
/// `predictor` is required in preemptive mode. Throws TrialTimeout.
TrialResult run_trial(const HumanTrajectory& traj, Mode mode, Predictor* predictor,
                      const TrialConfig& config, std::uint64_t seed);

/// Mixes a base seed with indices into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace handover
