#include "handover/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace handover {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::ParseError, "expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::ParseError, "expected 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string trajectory_to_json_line(const HumanTrajectory& traj) {
  json frames = json::array();
  for (const auto& f : traj.frames) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot.push_back(f.head_rot(r, c));
    }
    frames.push_back({{"t", f.t},
                      {"palm", vec(f.palm)},
                      {"elbow", vec(f.elbow)},
                      {"shoulder", vec(f.shoulder)},
                      {"head_pos", vec(f.head_pos)},
                      {"head_rot", rot}});
  }
  json j = {{"id", traj.id},
            {"grid",
             {{"n", traj.grid.n},
              {"m", traj.grid.m},
              {"cell_size_m", traj.grid.cell_size},
              {"origin", vec(traj.grid.origin)}}},
            {"target_cell", json::array({traj.target_cell.x, traj.target_cell.y})},
            {"target_point", vec(traj.target_point)},
            {"release_time", traj.release_time},
            {"frames", frames}};
  return j.dump();
}

HumanTrajectory trajectory_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    HumanTrajectory traj;
    traj.id = j.at("id").get<std::string>();
    const auto& g = j.at("grid");
    traj.grid.n = g.at("n").get<int>();
    traj.grid.m = g.at("m").get<int>();
    traj.grid.cell_size = g.at("cell_size_m").get<double>();
    traj.grid.origin = vec2(g.at("origin"));
    traj.grid.validate();
    const auto& tc = j.at("target_cell");
    if (!tc.is_array() || tc.size() != 2) throw Error(ErrorCode::ParseError, "target_cell");
    traj.target_cell = {tc[0].get<int>(), tc[1].get<int>()};
    if (!traj.grid.contains(traj.target_cell)) {
      throw Error(ErrorCode::TargetOutOfGrid, "target_cell outside grid");
    }
    traj.target_point = vec2(j.at("target_point"));
    traj.release_time = j.at("release_time").get<double>();
    for (const auto& jf : j.at("frames")) {
      RawFrame f;
      f.t = jf.at("t").get<double>();
      f.palm = vec3(jf.at("palm"));
      f.elbow = vec3(jf.at("elbow"));
      f.shoulder = vec3(jf.at("shoulder"));
      f.head_pos = vec3(jf.at("head_pos"));
      const auto& rot = jf.at("head_rot");
      if (!rot.is_array() || rot.size() != 9) throw Error(ErrorCode::ParseError, "head_rot needs 9 values");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) f.head_rot(r, c) = rot[r * 3 + c].get<double>();
      }
      f.validate();
      if (!traj.frames.empty() && !(f.t > traj.frames.back().t)) {
        throw Error(ErrorCode::NonMonotonicTime, "frame times must increase");
      }
      traj.frames.push_back(f);
    }
    return traj;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::vector<HumanTrajectory> generate_trajectories(int count, const GridSpec& grid,
                                                   const SimConfig& sim, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::InvalidConfig, "dataset count must be at least 1");
  grid.validate();
  std::vector<HumanTrajectory> out;
  out.reserve(count);
  std::mt19937_64 cells(derive_seed(seed, 0xce11));
  std::uniform_int_distribution<int> xs(0, grid.n - 1), ys(0, grid.m - 1);
  for (int i = 0; i < count; ++i) {
    const Cell target{xs(cells), ys(cells)};
    std::mt19937_64 rng(derive_seed(seed, 0x7a, static_cast<std::uint64_t>(i)));
    auto traj = gen_trajectory(rng, grid, target, sim);
    char id[32];
    std::snprintf(id, sizeof id, "traj-%05d", i);
    traj.id = id;
    out.push_back(std::move(traj));
  }
  return out;
}

void write_dataset(const std::vector<HumanTrajectory>& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  for (const auto& traj : data) os << trajectory_to_json_line(traj) << '\n';
  if (!os) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

void gen_dataset(int count, const GridSpec& grid, const SimConfig& sim, std::uint64_t seed,
                 const std::filesystem::path& path) {
  write_dataset(generate_trajectories(count, grid, sim, seed), path);
}

std::vector<HumanTrajectory> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<HumanTrajectory> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace handover
