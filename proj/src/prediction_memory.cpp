#include "handover/prediction_memory.hpp"

#include <cmath>

namespace handover {

void MemoryConfig::validate() const {
  if (history_len < 1 || !(epsilon >= 0.0) || !(epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "memory needs h >= 1 and 0 <= epsilon < 1");
  }
}

PredictionMemory::PredictionMemory(const GridSpec& grid, const MemoryConfig& config)
    : grid_(grid), config_(config) {
  grid_.validate();
  config_.validate();
  reset();
}

void PredictionMemory::reset() {
  entries_.assign(static_cast<std::size_t>(config_.history_len), Heatmap(grid_));
}

void PredictionMemory::push(const Heatmap& p) {
  if (!(p.grid() == grid_)) throw Error(ErrorCode::GridMismatch, "heatmap grid differs from memory");
  entries_.pop_back();
  entries_.push_front(p);
}

Heatmap PredictionMemory::weighted() const {
  Heatmap fused(grid_);
  auto out = fused.values();
  const double decay = 1.0 - config_.epsilon;
  double w = 1.0;
  for (const auto& e : entries_) {
    const auto v = e.values();
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * v[c];
    w *= decay;
  }
  const double inv_h = 1.0 / static_cast<double>(config_.history_len);
  for (double& v : out) v *= inv_h;
  return fused;
}

Peak peak(const Heatmap& map) {
  Peak best{map.at(0, 0), {0, 0}};
  const auto& g = map.grid();
  for (int x = 0; x < g.n; ++x) {
    for (int y = 0; y < g.m; ++y) {
      if (map.at(x, y) > best.value) best = {map.at(x, y), {x, y}};
    }
  }
  return best;
}

double fusion_gain(const MemoryConfig& config) {
  double sum = 0.0, w = 1.0;
  for (int i = 0; i < config.history_len; ++i, w *= 1.0 - config.epsilon) sum += w;
  return sum / config.history_len;
}

}  // namespace handover
