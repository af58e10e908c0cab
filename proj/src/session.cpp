#include "handover/session.hpp"

#include <cmath>

#include "json.hpp"

namespace handover {

using nlohmann::json;

namespace {

Vec3 vec3_field(const json& msg, const char* key) {
  const auto& v = msg.at(key);
  if (!v.is_array() || v.size() != 3) throw Error(ErrorCode::MalformedMessage, std::string(key) + " needs 3 numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

RawFrame parse_frame(const json& msg) {
  RawFrame f;
  f.t = msg.at("t").get<double>();
  f.palm = vec3_field(msg, "palm");
  f.elbow = vec3_field(msg, "elbow");
  f.shoulder = vec3_field(msg, "shoulder");
  f.head_pos = vec3_field(msg, "head_pos");
  const auto& rot = msg.at("head_rot");
  if (!rot.is_array() || rot.size() != 9) throw Error(ErrorCode::MalformedMessage, "head_rot needs 9 numbers");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f.head_rot(r, c) = rot[r * 3 + c].get<double>();
  }
  return f;
}

json grid_json(const Heatmap& map) {
  const auto& g = map.grid();
  json rows = json::array();
  for (int x = 0; x < g.n; ++x) {
    json row = json::array();
    for (int y = 0; y < g.m; ++y) row.push_back(map.at(x, y));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string error_message(const std::string& detail) {
  // details may quote raw client bytes, which are not always valid UTF-8
  return json{{"type", "error"}, {"detail", detail}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

Session::Session(std::string id, Mode mode, const IntentModel* model, const TrialConfig& config,
                 std::uint64_t seed)
    : id_(std::move(id)),
      mode_(mode),
      model_(model),
      config_(config),
      seed_(seed),
      controller_(config, mode, derive_seed(seed, 0x51a7)) {
  if (mode == Mode::Preemptive && !model_) {
    throw Error(ErrorCode::ModelUnavailable, "preemptive sessions need a loaded model");
  }
  if (model_ && !(model_->grid() == config_.grid)) {
    throw Error(ErrorCode::GridMismatch, "model grid differs from the session grid");
  }
  start_trial();
}

void Session::start_trial() {
  controller_.set_mode(mode_);
  controller_.reset(0.0, derive_seed(seed_, 0x51a7));
  prev_.reset();
  hidden_.reset();
  last_t_.reset();
  frame_count_ = 0;
  placed_ = false;
  placed_cell_.reset();
}

std::vector<std::string> Session::handle(const std::string& message) {
  if (closed_) return {error_message("session is closed")};
  try {
    json msg;
    try {
      msg = json::parse(message);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedMessage, std::string("invalid JSON: ") + e.what());
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      throw Error(ErrorCode::MalformedMessage, "message needs a string \"type\"");
    }
    const auto type = msg["type"].get<std::string>();
    try {
      if (type == "frame") return on_frame(parse_frame(msg));
      if (type == "place") {
        const auto& p = msg.at("point");
        if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::MalformedMessage, "point needs 2 numbers");
        std::optional<double> t;
        if (msg.contains("t")) t = msg["t"].get<double>();
        return on_place({p[0].get<double>(), p[1].get<double>()}, t);
      }
      if (type == "reset") {
        Mode mode = mode_;
        if (msg.contains("mode")) mode = parse_mode(msg["mode"].get<std::string>());
        if (mode == Mode::Preemptive && !model_) {
          throw Error(ErrorCode::ModelUnavailable, "no model loaded; preemptive mode unavailable");
        }
        mode_ = mode;
        start_trial();
        return {robot_message(0.0)};
      }
      if (type == "close") {
        closed_ = true;
        return {};
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedMessage, e.what());
    }
    throw Error(ErrorCode::MalformedMessage, "unknown message type '" + type + "'");
  } catch (const Error& e) {
    return {error_message(e.what())};
  }
}

std::vector<std::string> Session::on_frame(const RawFrame& raw) {
  raw.validate();
  if (last_t_ && !(raw.t > *last_t_)) throw Error(ErrorCode::NonMonotonicTime, "frame times must increase");
  std::vector<std::string> out;
  if (controller_.grasped()) {
    last_t_ = raw.t;
    out.push_back(robot_message(raw.t));
    return out;
  }
  FeatureFrame f = build_features(prev_ ? &*prev_ : nullptr, raw, config_.plane, config_.grid.center());
  if (frame_count_ == 0 && !placed_) controller_.reset(raw.t, derive_seed(seed_, 0x51a7));
  last_t_ = raw.t;
  ++frame_count_;

  const double t = raw.t + config_.sim.inference_latency;
  controller_.advance_to(t);
  controller_.set_hand(Vec2(raw.palm.x(), raw.palm.y()));
  if (mode_ == Mode::Preemptive && !placed_) {
    auto step = forward(*model_, f.input, hidden_ ? &*hidden_ : nullptr);
    hidden_ = std::move(step.hidden);
    controller_.on_heatmap(step.heatmap, t);
    const Heatmap fused = controller_.arbiter().memory().weighted();
    const Peak pk = peak(fused);
    out.push_back(json{{"type", "heatmap"},
                       {"t", raw.t},
                       {"values", grid_json(step.heatmap)},
                       {"fused", grid_json(fused)},
                       {"peak", {{"p", pk.value}, {"cell", json::array({pk.cell.x, pk.cell.y})}}}}
                      .dump());
  }
  prev_ = std::move(f);
  out.push_back(robot_message(t));
  return out;
}

std::vector<std::string> Session::on_place(const Vec2& point, std::optional<double> t) {
  if (placed_) throw Error(ErrorCode::MalformedMessage, "object already placed; send reset first");
  const double when = t.value_or(last_t_.value_or(0.0));
  if (!std::isfinite(when)) throw Error(ErrorCode::MalformedMessage, "place time must be finite");
  if (last_t_ && when < *last_t_) throw Error(ErrorCode::NonMonotonicTime, "place precedes the last frame");
  if (frame_count_ == 0) controller_.reset(when, derive_seed(seed_, 0x51a7));
  const auto cell = config_.grid.cell_of(point);
  controller_.advance_to(when);
  controller_.on_detection(point, when);
  placed_ = true;
  placed_cell_ = cell;
  last_t_ = when;

  std::vector<std::string> out;
  out.push_back(robot_message(when));
  while (auto end = controller_.next_motion_end()) {
    controller_.advance_to(*end);
    out.push_back(robot_message(*end));
  }
  if (controller_.grasped()) out.push_back(metrics_message());
  return out;
}

std::string Session::robot_message(double t) {
  const ArmState arm = controller_.arm_at(t);
  const auto& state = controller_.arbiter().state();
  json goal = nullptr;
  if (state.goal_cell) goal = json::array({state.goal_cell->x, state.goal_cell->y});
  return json{{"type", "robot"},
              {"t", t},
              {"pose", json::array({arm.pos.x(), arm.pos.y(), arm.pos.z()})},
              {"gripper", arm.gripper == Gripper::Closed ? "closed" : "open"},
              {"action", std::string(to_string(state.kind))},
              {"goal", goal},
              {"preempted", controller_.take_preempted()}}
      .dump();
}

std::string Session::metrics_message() const {
  const double t0 = controller_.trial_start();
  json err = nullptr;
  if (auto goal = controller_.arbiter().last_predictive_goal(); goal && placed_cell_) {
    err = grid_error(config_.grid, *goal, *placed_cell_).euclid;
  }
  return json{{"type", "metrics"},
              {"response_time", controller_.first_motion_time().value_or(t0) - t0},
              {"start_to_grab", controller_.grasp_time().value_or(t0) - t0},
              {"error_grids", err}}
      .dump();
}

// ---------------------------------------------------------------------------

SessionManager::SessionManager(std::shared_ptr<const IntentModel> model, TrialConfig config,
                               std::uint64_t seed)
    : model_(std::move(model)), config_(std::move(config)), seed_(seed) {}

std::string SessionManager::open(Mode mode) {
  std::lock_guard lock(mutex_);
  const std::uint64_t n = next_id_;
  const std::string id = "s" + std::to_string(n);
  auto slot = std::make_shared<Slot>();
  slot->session = std::make_unique<Session>(id, mode, model_.get(), config_, derive_seed(seed_, n));
  ++next_id_;
  sessions_.emplace(id, std::move(slot));
  return id;
}

std::shared_ptr<SessionManager::Slot> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionManager::handle(const std::string& session_id, const std::string& message) {
  auto slot = find(session_id);
  std::lock_guard lock(slot->mutex);
  return slot->session->handle(message);
}

void SessionManager::close(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  sessions_.erase(session_id);
}

bool SessionManager::closed(const std::string& session_id) const {
  auto slot = find(session_id);
  std::lock_guard lock(slot->mutex);
  return slot->session->closed();
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace handover
