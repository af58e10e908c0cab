#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "handover/sim.hpp"

namespace handover {

/// JSON Lines trajectory store: one object per line with keys
/// id, grid{n,m,cell_size_m,origin}, target_cell, target_point, release_time,
/// frames[{t, palm, elbow, shoulder, head_pos, head_rot(9, row-major)}].
/// Only raw frames are stored; features and labels are derived on load.
std::string trajectory_to_json_line(const HumanTrajectory& traj);
HumanTrajectory trajectory_from_json_line(const std::string& line);

/// `count` trajectories with uniformly drawn target cells, deterministic in `seed`.
std::vector<HumanTrajectory> generate_trajectories(int count, const GridSpec& grid,
                                                   const SimConfig& sim, std::uint64_t seed);

/// Writes generate_trajectories(...) to `path`. Throws InvalidConfig (count < 1), IoFailure.
void gen_dataset(int count, const GridSpec& grid, const SimConfig& sim, std::uint64_t seed,
                 const std::filesystem::path& path);

void write_dataset(const std::vector<HumanTrajectory>& data, const std::filesystem::path& path);
/// Throws IoFailure, ParseError (with the offending line number).
std::vector<HumanTrajectory> read_dataset(const std::filesystem::path& path);

}  // namespace handover
