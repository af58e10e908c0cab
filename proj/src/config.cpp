#include "handover/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace handover {

using nlohmann::json;
using nlohmann::ordered_json;

void RunConfig::validate() const {
  trial.grid.validate();
  trial.plane.validate();
  trial.sim.validate();
  trial.arm.validate();
  trial.stomp.validate();
  trial.arbitration.validate();
  trial.labels.validate();
  train.validate();
  if (data_count < 1) throw Error(ErrorCode::InvalidConfig, "data.count must be at least 1");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "data.holdout_fraction must be in [0, 1)");
  }
  if (study_trials < 1) throw Error(ErrorCode::InvalidConfig, "study.trials must be at least 1");
  if (study_cell_count < 1) throw Error(ErrorCode::InvalidConfig, "study.cell_count must be at least 1");
  if (serve_port < 0 || serve_port > 65535) throw Error(ErrorCode::InvalidConfig, "serve.port out of range");
  parse_modes(study_mode);
  if (!study_cells.empty()) parse_cells(study_cells);
}

namespace {

struct Entry {
  std::string key;
  std::function<ordered_json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const char* want) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' expects " + want);
}

template <class Access>
Entry real(std::string key, Access access) {
  return {key,
          [access](const RunConfig& c) { return ordered_json(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const json& v) {
            if (!v.is_number()) bad_value(key, "a number");
            access(c) = v.get<double>();
          }};
}

template <class Access>
Entry integer(std::string key, Access access) {
  return {key,
          [access](const RunConfig& c) { return ordered_json(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const json& v) {
            if (!v.is_number_integer()) bad_value(key, "an integer");
            const auto i = v.get<long long>();
            if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
              bad_value(key, "a 32-bit integer");
            }
            access(c) = static_cast<int>(i);
          }};
}

template <class Access>
Entry text(std::string key, Access access) {
  return {key,
          [access](const RunConfig& c) { return ordered_json(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const json& v) {
            if (!v.is_string()) bad_value(key, "a string");
            access(c) = v.get<std::string>();
          }};
}

#define HO_REAL(key, expr) real(key, [](RunConfig& c) -> double& { return expr; })
#define HO_INT(key, expr) integer(key, [](RunConfig& c) -> int& { return expr; })
#define HO_VEC3(prefix, expr)                          \
  HO_REAL(prefix "_x", (expr).x()), HO_REAL(prefix "_y", (expr).y()), \
      HO_REAL(prefix "_z", (expr).z())

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t{
        {"seed",
         [](const RunConfig& c) { return ordered_json(c.seed); },
         [](RunConfig& c, const json& v) {
           if (!v.is_number_unsigned()) bad_value("seed", "a non-negative integer");
           c.seed = v.get<std::uint64_t>();
         }},
        HO_INT("grid.n", c.trial.grid.n),
        HO_INT("grid.m", c.trial.grid.m),
        HO_REAL("grid.cell_size", c.trial.grid.cell_size),
        HO_REAL("grid.origin_x", c.trial.grid.origin.x()),
        HO_REAL("grid.origin_y", c.trial.grid.origin.y()),
        HO_VEC3("plane.normal", c.trial.plane.normal),
        HO_VEC3("plane.point", c.trial.plane.point),
        HO_REAL("sim.frame_rate", c.trial.sim.frame_rate),
        HO_REAL("sim.min_duration", c.trial.sim.min_duration),
        HO_REAL("sim.max_duration", c.trial.sim.max_duration),
        HO_VEC3("sim.hand_start_min", c.trial.sim.hand_start_min),
        HO_VEC3("sim.hand_start_max", c.trial.sim.hand_start_max),
        HO_VEC3("sim.head_pos", c.trial.sim.head_pos),
        HO_VEC3("sim.shoulder_pos", c.trial.sim.shoulder_pos),
        HO_REAL("sim.release_height", c.trial.sim.release_height),
        HO_REAL("sim.gaze_lead", c.trial.sim.gaze_lead),
        HO_REAL("sim.hand_noise", c.trial.sim.hand_noise),
        HO_REAL("sim.gaze_noise", c.trial.sim.gaze_noise),
        HO_REAL("sim.target_jitter", c.trial.sim.target_jitter),
        HO_REAL("sim.detection_latency", c.trial.sim.detection_latency),
        HO_REAL("sim.plan_latency", c.trial.sim.plan_latency),
        HO_REAL("sim.inference_latency", c.trial.sim.inference_latency),
        HO_REAL("sim.hand_zone_radius", c.trial.sim.hand_zone_radius),
        HO_REAL("sim.trial_timeout", c.trial.sim.trial_timeout),
        HO_VEC3("arm.axis_speed", c.trial.arm.axis_speed),
        HO_VEC3("arm.workspace_min", c.trial.arm.workspace.min),
        HO_VEC3("arm.workspace_max", c.trial.arm.workspace.max),
        HO_REAL("arm.travel_z", c.trial.arm.travel_z),
        HO_REAL("arm.pregrasp_z", c.trial.arm.pregrasp_z),
        HO_REAL("arm.grasp_z", c.trial.arm.grasp_z),
        HO_VEC3("arm.ready", c.trial.arm.ready),
        HO_INT("stomp.num_waypoints", c.trial.stomp.num_waypoints),
        HO_INT("stomp.rollouts", c.trial.stomp.rollouts),
        HO_INT("stomp.iterations", c.trial.stomp.iterations),
        HO_REAL("stomp.noise_x", c.trial.stomp.noise_stddev.x()),
        HO_REAL("stomp.noise_y", c.trial.stomp.noise_stddev.y()),
        HO_REAL("stomp.smoothness_weight", c.trial.stomp.smoothness_weight),
        HO_REAL("stomp.obstacle_weight", c.trial.stomp.obstacle_weight),
        HO_REAL("stomp.temperature", c.trial.stomp.temperature),
        HO_REAL("stomp.safety_margin", c.trial.stomp.safety_margin),
        HO_REAL("arbitration.gamma", c.trial.arbitration.gamma),
        HO_INT("arbitration.tol_x", c.trial.arbitration.tol_x),
        HO_INT("arbitration.tol_y", c.trial.arbitration.tol_y),
        HO_INT("memory.history_len", c.trial.arbitration.memory.history_len),
        HO_REAL("memory.epsilon", c.trial.arbitration.memory.epsilon),
        HO_REAL("labels.sigma_x", c.trial.labels.sigma_x),
        HO_REAL("labels.sigma_y", c.trial.labels.sigma_y),
        HO_REAL("labels.steepness", c.trial.labels.steepness),
        HO_INT("train.epochs", c.train.epochs),
        HO_REAL("train.learning_rate", c.train.learning_rate),
        HO_INT("train.batch_size", c.train.batch_size),
        HO_REAL("train.beta1", c.train.beta1),
        HO_REAL("train.beta2", c.train.beta2),
        HO_REAL("train.adam_eps", c.train.adam_eps),
        HO_REAL("train.clip_norm", c.train.clip_norm),
        HO_INT("train.hidden_dim", c.train.hidden_dim),
        HO_INT("data.count", c.data_count),
        HO_REAL("data.holdout_fraction", c.holdout_fraction),
        HO_INT("study.trials", c.study_trials),
        HO_INT("study.cell_count", c.study_cell_count),
        text("study.cells", [](RunConfig& c) -> std::string& { return c.study_cells; }),
        text("study.mode", [](RunConfig& c) -> std::string& { return c.study_mode; }),
        HO_INT("serve.port", c.serve_port),
    };
    return t;
  }();
  return table;
}

#undef HO_REAL
#undef HO_INT
#undef HO_VEC3

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

void apply_config_json(RunConfig& config, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto& table = entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key == key; });
    if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    it->set(config, value);
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_config_json(config, ss.str());
}

std::string config_snapshot(const RunConfig& config) {
  ordered_json j = ordered_json::object();
  for (const auto& e : entries()) j[e.key] = e.get(config);
  return j.dump(2);
}

std::pair<int, int> parse_grid_dims(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos || x == 0 || x + 1 >= text.size()) {
    throw Error(ErrorCode::InvalidConfig, "grid must look like NxM");
  }
  try {
    std::size_t used_n = 0, used_m = 0;
    const int n = std::stoi(text.substr(0, x), &used_n);
    const int m = std::stoi(text.substr(x + 1), &used_m);
    if (used_n != x || used_m != text.size() - x - 1 || n < 1 || m < 1) throw std::invalid_argument("grid");
    return {n, m};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidConfig, "grid must look like NxM with positive integers");
  }
}

std::vector<Cell> parse_cells(const std::string& text) {
  std::vector<Cell> cells;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("cell");
      std::size_t ux = 0, uy = 0;
      const int x = std::stoi(item.substr(0, colon), &ux);
      const int y = std::stoi(item.substr(colon + 1), &uy);
      if (ux != colon || uy != item.size() - colon - 1) throw std::invalid_argument("cell");
      cells.push_back({x, y});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "cells must look like x:y,x:y");
    }
  }
  if (cells.empty()) throw Error(ErrorCode::InvalidConfig, "cell list is empty");
  return cells;
}

std::vector<Mode> parse_modes(const std::string& text) {
  if (text == "both") return {Mode::Reactive, Mode::Preemptive};
  return {parse_mode(text)};
}

StudyConfig study_config(const RunConfig& config) {
  StudyConfig s;
  s.trial = config.trial;
  s.trials = config.study_trials;
  s.modes = parse_modes(config.study_mode);
  s.seed = config.seed;
  s.cells = config.study_cells.empty()
                ? random_cells(config.trial.grid, config.study_cell_count, config.seed)
                : parse_cells(config.study_cells);
  return s;
}

}  // namespace handover
