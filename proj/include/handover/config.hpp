#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "handover/sim.hpp"
#include "handover/study.hpp"
#include "handover/training.hpp"

namespace handover {

/// Everything a CLI run depends on. Files and snapshots use a flat JSON object
/// whose keys are dotted paths such as "stomp.rollouts" or "memory.epsilon".
struct RunConfig {
  std::uint64_t seed = 0;
  TrialConfig trial;
  TrainConfig train;
  int data_count = 500;
  double holdout_fraction = 0.2;  // share of a dataset held out by `train`
  int study_trials = 15;
  int study_cell_count = 11;  // random cells used when study_cells is empty
  std::string study_cells;    // "x:y,x:y,..."
  std::string study_mode = "both";
  int serve_port = 8765;

  void validate() const;
};

/// Every key accepted in a config file, in snapshot order.
std::vector<std::string> config_keys();

/// Applies a flat JSON object on top of `config`. Unknown keys and values of
/// the wrong type throw InvalidConfig; malformed JSON throws ParseError.
void apply_config_json(RunConfig& config, const std::string& text);
/// Throws IoFailure in addition to the above.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Pretty-printed flat JSON of every key; feeding it back reproduces the config.
std::string config_snapshot(const RunConfig& config);

/// "NxM" -> n, m. Throws InvalidConfig.
std::pair<int, int> parse_grid_dims(const std::string& text);
/// "x:y,x:y" -> cells. Throws InvalidConfig.
std::vector<Cell> parse_cells(const std::string& text);
std::vector<Mode> parse_modes(const std::string& text);  // reactive|preemptive|both

/// Study settings resolved from a run config (cells drawn from the seed when unset).
StudyConfig study_config(const RunConfig& config);

}  // namespace handover
