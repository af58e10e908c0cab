#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "handover/geometry.hpp"

namespace handover {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// n cells along x, m along y; cell (0,0) has its corner at `origin`.
struct GridSpec {
  int n = 5;
  int m = 10;
  double cell_size = 0.08;
  Vec2 origin = Vec2::Zero();

  void validate() const;
  std::size_t cells() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(m); }
  bool contains(const Cell& c) const { return c.x >= 0 && c.x < n && c.y >= 0 && c.y < m; }
  bool contains(const Vec2& point) const;
  Vec2 cell_center(const Cell& c) const;
  Vec2 center() const;
  Vec2 extent() const { return {n * cell_size, m * cell_size}; }
  /// Cell containing `point`; points on the far boundary map to the last cell.
  std::optional<Cell> cell_of(const Vec2& point) const;
  /// Continuous grid coordinates of a point (cell centers sit at integers).
  Vec2 grid_coords(const Vec2& point) const;

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.n == b.n && a.m == b.m && a.cell_size == b.cell_size && a.origin == b.origin;
  }
};

/// Per-cell values laid out row-major with x as the row: value(x, y) = values[x * m + y].
class Heatmap {
 public:
  Heatmap() = default;
  explicit Heatmap(const GridSpec& grid, double fill = 0.0)
      : grid_(grid), values_(grid.cells(), fill) {}
  Heatmap(const GridSpec& grid, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  double& at(int x, int y) { return values_[index(x, y)]; }
  double at(int x, int y) const { return values_[index(x, y)]; }
  double& at(const Cell& c) { return at(c.x, c.y); }
  double at(const Cell& c) const { return at(c.x, c.y); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double max_value() const;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(grid_.m) + static_cast<std::size_t>(y);
  }

  GridSpec grid_;
  std::vector<double> values_;
};

struct GridError {
  double dx = 0.0;         // |Δx| in cells
  double dy = 0.0;         // |Δy| in cells
  double euclid = 0.0;     // in cells
  double meters = 0.0;     // between cell centers
};

GridError grid_error(const GridSpec& grid, const Cell& predicted, const Cell& truth);

}  // namespace handover
