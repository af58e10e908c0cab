#include "handover/study.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

namespace handover {

void StudyConfig::validate() const {
  if (cells.empty()) throw Error(ErrorCode::InvalidConfig, "study needs at least one cell");
  if (trials < 1) throw Error(ErrorCode::InvalidConfig, "study needs at least one trial per cell");
  if (modes.empty()) throw Error(ErrorCode::InvalidConfig, "study needs at least one mode");
  trial.grid.validate();
  for (const auto& c : cells) {
    if (!trial.grid.contains(c)) throw Error(ErrorCode::TargetOutOfGrid, "study cell outside grid");
  }
}

std::vector<Cell> random_cells(const GridSpec& grid, int count, std::uint64_t seed) {
  grid.validate();
  if (count < 1 || static_cast<std::size_t>(count) > grid.cells()) {
    throw Error(ErrorCode::InvalidConfig, "cell count must be between 1 and the grid size");
  }
  std::vector<Cell> all;
  for (int x = 0; x < grid.n; ++x) {
    for (int y = 0; y < grid.m; ++y) all.push_back({x, y});
  }
  std::mt19937_64 rng(derive_seed(seed, 0x5e1));
  // Partial Fisher-Yates with an explicit index draw so the result does not
  // depend on the standard library's shuffle.
  for (int i = 0; i < count; ++i) {
    const auto span = static_cast<std::uint64_t>(all.size() - i);
    const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng() % span);
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  return all;
}

PredictorFactory model_predictors(const IntentModel& model) {
  return [&model](const HumanTrajectory&) { return std::make_unique<ModelPredictor>(model); };
}

PredictorFactory oracle_predictors(const LabelParams& labels) {
  return [labels](const HumanTrajectory& traj) {
    return std::make_unique<OraclePredictor>(traj.grid, traj.target_cell, labels);
  };
}

StudyReport run_study(const StudyConfig& config, const PredictorFactory& predictors,
                      Exec exec) {
  config.validate();
  const bool needs_model =
      std::find(config.modes.begin(), config.modes.end(), Mode::Preemptive) != config.modes.end();
  if (needs_model && !predictors) {
    throw Error(ErrorCode::ModelUnavailable, "preemptive mode requires a predictor");
  }

  const std::size_t n_cells = config.cells.size();
  const auto n_trials = static_cast<std::size_t>(config.trials);
  const std::size_t n_modes = config.modes.size();

  StudyReport report;
  report.trials.resize(n_cells * n_trials * n_modes);
  parallel_for(exec, n_cells * n_trials, [&](std::size_t job) {
    const std::size_t ci = job / n_trials;
    const std::size_t k = job % n_trials;
    const std::uint64_t seed = derive_seed(config.seed, ci, k);
    std::mt19937_64 rng(seed);
    const auto traj = gen_trajectory(rng, config.trial.grid, config.cells[ci], config.trial.sim);
    for (std::size_t mi = 0; mi < n_modes; ++mi) {
      auto& slot = report.trials[job * n_modes + mi];
      slot.cell_index = static_cast<int>(ci);
      slot.trial_index = static_cast<int>(k);
      const Mode mode = config.modes[mi];
      try {
        std::unique_ptr<Predictor> predictor;
        if (mode == Mode::Preemptive) predictor = predictors(traj);
        slot.result = run_trial(traj, mode, predictor.get(), config.trial, seed);
      } catch (const Error& e) {
        slot.result = TrialResult{};
        slot.result.mode = mode;
        slot.result.seed = seed;
        slot.result.target_cell = traj.target_cell;
        slot.result.error = e.what();
      }
    }
  });
  aggregate(report);
  return report;
}

namespace {

struct Pairing {
  std::vector<double> response_gain, grab_gain, grab_win;
  std::vector<double> r_response, p_response, r_grab, p_grab;
};

PairedComparison compare(const Pairing& p, std::optional<Cell> cell) {
  PairedComparison c;
  c.cell = cell;
  c.response_gain = summarize(p.response_gain);
  c.grab_gain = summarize(p.grab_gain);
  c.grab_win = summarize(p.grab_win);
  if (p.r_response.size() >= 2 && p.p_response.size() >= 2) {
    c.p_response = significance(p.r_response, p.p_response);
    c.p_grab = significance(p.r_grab, p.p_grab);
  }
  return c;
}

}  // namespace

void aggregate(StudyReport& report) {
  report.summaries.clear();
  report.cells.clear();
  report.overall.reset();

  std::sort(report.trials.begin(), report.trials.end(), [](const StudyTrial& a, const StudyTrial& b) {
    if (a.cell_index != b.cell_index) return a.cell_index < b.cell_index;
    if (a.trial_index != b.trial_index) return a.trial_index < b.trial_index;
    return a.result.mode < b.result.mode;
  });

  // (cell index, mode) -> samples, in trial order
  struct Samples {
    Cell cell;
    std::vector<double> response, grab, error;
    int failures = 0;
  };
  std::map<std::pair<int, Mode>, Samples> groups;
  std::map<int, Pairing> pairs;
  Pairing pooled;
  bool have_pairs = false;

  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    const auto& t = report.trials[i];
    auto& g = groups[{t.cell_index, t.result.mode}];
    g.cell = t.result.target_cell;
    if (!t.result.error.empty()) {
      ++g.failures;
      continue;
    }
    g.response.push_back(t.result.response_time);
    g.grab.push_back(t.result.start_to_grab);
    if (t.result.prediction_error) g.error.push_back(t.result.prediction_error->euclid);
  }

  // Pairs are adjacent after sorting: the reactive run precedes the preemptive one.
  for (std::size_t i = 0; i + 1 < report.trials.size(); ++i) {
    const auto& r = report.trials[i];
    const auto& p = report.trials[i + 1];
    if (r.cell_index != p.cell_index || r.trial_index != p.trial_index) continue;
    if (r.result.mode != Mode::Reactive || p.result.mode != Mode::Preemptive) continue;
    if (!r.result.error.empty() || !p.result.error.empty()) continue;
    have_pairs = true;
    for (Pairing* dst : {&pairs[r.cell_index], &pooled}) {
      dst->response_gain.push_back(r.result.response_time - p.result.response_time);
      dst->grab_gain.push_back(r.result.start_to_grab - p.result.start_to_grab);
      dst->grab_win.push_back(p.result.start_to_grab < r.result.start_to_grab ? 1.0 : 0.0);
      dst->r_response.push_back(r.result.response_time);
      dst->p_response.push_back(p.result.response_time);
      dst->r_grab.push_back(r.result.start_to_grab);
      dst->p_grab.push_back(p.result.start_to_grab);
    }
  }

  for (const auto& [key, g] : groups) {
    CellModeSummary s;
    s.cell = g.cell;
    s.mode = key.second;
    s.response_time = summarize(g.response);
    s.start_to_grab = summarize(g.grab);
    s.error_grids = summarize(g.error);
    s.failures = g.failures;
    report.summaries.push_back(s);
  }
  for (const auto& [ci, p] : pairs) {
    const auto it = groups.find({ci, Mode::Reactive});
    report.cells.push_back(compare(p, it->second.cell));
  }
  if (have_pairs) report.overall = compare(pooled, std::nullopt);
}

}  // namespace handover
