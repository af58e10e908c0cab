#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "handover/parallel.hpp"
#include "handover/sim.hpp"
#include "handover/stats.hpp"

namespace handover {

struct StudyConfig {
  std::vector<Cell> cells;  // placement sequence
  int trials = 15;          // paired seeds per cell
  std::vector<Mode> modes{Mode::Reactive, Mode::Preemptive};
  std::uint64_t seed = 0;
  TrialConfig trial;

  void validate() const;
};

/// `count` distinct cells drawn uniformly from the grid.
std::vector<Cell> random_cells(const GridSpec& grid, int count, std::uint64_t seed);

/// Builds a fresh predictor for one preemptive trial.
using PredictorFactory = std::function<std::unique_ptr<Predictor>(const HumanTrajectory&)>;

PredictorFactory model_predictors(const IntentModel& model);
PredictorFactory oracle_predictors(const LabelParams& labels = {});

struct StudyTrial {
  int cell_index = 0;
  int trial_index = 0;
  TrialResult result;
};

struct CellModeSummary {
  Cell cell;
  Mode mode = Mode::Reactive;
  Summary response_time;
  Summary start_to_grab;
  Summary error_grids;  // decision-time Euclidean error, preemptive trials that launched
  int failures = 0;
};

/// Reactive minus preemptive, over seeds where both modes completed.
struct PairedComparison {
  std::optional<Cell> cell;  // empty for the pooled comparison
  Summary response_gain;
  Summary grab_gain;
  Summary grab_win;  // 1 where preemptive grabbed strictly earlier, else 0
  std::optional<double> p_response;
  std::optional<double> p_grab;
};

struct StudyReport {
  std::vector<StudyTrial> trials;  // ordered by (cell index, trial index, mode)
  std::vector<CellModeSummary> summaries;
  std::vector<PairedComparison> cells;
  std::optional<PairedComparison> overall;
  std::string config_snapshot;  // JSON object text
};

/// Every (cell, trial) pair draws one human trajectory that all modes replay
/// with the same seed. Trial failures are recorded on the trial, not thrown.
/// Throws ModelUnavailable when preemptive mode is requested without predictors.
StudyReport run_study(const StudyConfig& config, const PredictorFactory& predictors,
                      Exec exec = Exec::Parallel);

/// Recomputes summaries and comparisons from `report.trials`.
void aggregate(StudyReport& report);

}  // namespace handover
