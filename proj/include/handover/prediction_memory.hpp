#pragma once

#include <deque>

#include "handover/heatmap.hpp"

namespace handover {

struct MemoryConfig {
  int history_len = 10;  // h
  double epsilon = 0.2;  // decay

  void validate() const;
};

struct Peak {
  double value = 0.0;
  Cell cell;
};

/// Fixed-length history of raw heatmaps, newest first, zero-filled at start.
class PredictionMemory {
 public:
  PredictionMemory(const GridSpec& grid, const MemoryConfig& config);

  /// Newest becomes entry 0; the oldest is evicted. Throws GridMismatch.
  void push(const Heatmap& p);
  /// Back to h all-zero entries.
  void reset();

  /// pbar(x,y) = (1/h) * sum_i (1 - eps)^i * p_i(x,y). Note the 1/h rather
  /// than 1/sum(w): stable maps fuse to roughly sum(w)/h of their raw value.
  Heatmap weighted() const;

  const Heatmap& entry(int i) const { return entries_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(entries_.size()); }
  const MemoryConfig& config() const { return config_; }
  const GridSpec& grid() const { return grid_; }

 private:
  GridSpec grid_;
  MemoryConfig config_;
  std::deque<Heatmap> entries_;
};

/// Maximum cell value and its cell; ties go to the smallest x, then smallest y.
Peak peak(const Heatmap& map);

/// Sum of (1 - eps)^i over i < h divided by h: what a constant map is scaled by.
double fusion_gain(const MemoryConfig& config);

}  // namespace handover
