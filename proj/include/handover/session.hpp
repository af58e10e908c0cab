#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "handover/sim.hpp"

namespace handover {

/// One live trial driven by client messages. Messages are JSON objects:
///
///   in:  frame {t, palm, elbow, shoulder, head_pos, head_rot[9]}
///        place {point[2], t?}   reset {mode?}   close
///   out: heatmap {t, values[n][m], fused[n][m], peak{p, cell}}
///        robot {t, pose[3], gripper, action, goal[2]|null, preempted}
///        metrics {response_time, start_to_grab, error_grids|null}
///        error {detail}
///
/// A trial starts at its first frame. "place" is the object detection; the
/// arm is then run forward on the planner's clock until the gripper closes.
class Session {
 public:
  /// `model` may be null for reactive sessions. Throws ModelUnavailable,
  /// GridMismatch.
  Session(std::string id, Mode mode, const IntentModel* model, const TrialConfig& config,
          std::uint64_t seed);

  /// Replies to one inbound message, in emission order. Never throws for bad
  /// input; problems come back as "error" messages.
  std::vector<std::string> handle(const std::string& message);

  const std::string& id() const { return id_; }
  Mode mode() const { return mode_; }
  bool closed() const { return closed_; }
  bool placed() const { return placed_; }
  const HandoverController& controller() const { return controller_; }
  int frames() const { return frame_count_; }

 private:
  void start_trial();
  std::vector<std::string> on_frame(const RawFrame& frame);
  std::vector<std::string> on_place(const Vec2& point, std::optional<double> t);
  std::string robot_message(double t);
  std::string metrics_message() const;

  std::string id_;
  Mode mode_;
  const IntentModel* model_;
  TrialConfig config_;
  std::uint64_t seed_;
  HandoverController controller_;
  std::optional<FeatureFrame> prev_;
  std::optional<HiddenState> hidden_;
  std::optional<double> last_t_;
  int frame_count_ = 0;
  bool placed_ = false;
  bool closed_ = false;
  std::optional<Cell> placed_cell_;
};

/// Independent sessions keyed by id; each session handles one message at a time.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const IntentModel> model, TrialConfig config, std::uint64_t seed);

  /// Throws ModelUnavailable (preemptive without a model), GridMismatch.
  std::string open(Mode mode);
  /// Throws UnknownSession.
  std::vector<std::string> handle(const std::string& session_id, const std::string& message);
  void close(const std::string& session_id);
  /// True once the session has processed a "close" message. Throws UnknownSession.
  bool closed(const std::string& session_id) const;
  std::size_t size() const;
  bool has_model() const { return model_ != nullptr; }
  const TrialConfig& config() const { return config_; }

 private:
  struct Slot {
    std::mutex mutex;
    std::unique_ptr<Session> session;
  };
  std::shared_ptr<Slot> find(const std::string& id) const;

  std::shared_ptr<const IntentModel> model_;
  TrialConfig config_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// The JSON object for an "error" reply.
std::string error_message(const std::string& detail);

}  // namespace handover
