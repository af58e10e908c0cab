#include "handover/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace handover {

void GridSpec::validate() const {
  if (n < 1 || m < 1 || !(cell_size > 0.0) || !origin.allFinite()) {
    throw Error(ErrorCode::InvalidConfig, "grid needs n >= 1, m >= 1 and cell_size > 0");
  }
}

bool GridSpec::contains(const Vec2& point) const {
  const Vec2 rel = point - origin;
  const Vec2 ext = extent();
  return rel.x() >= 0.0 && rel.y() >= 0.0 && rel.x() <= ext.x() && rel.y() <= ext.y();
}

Vec2 GridSpec::cell_center(const Cell& c) const {
  return origin + Vec2((c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size);
}

Vec2 GridSpec::center() const { return origin + 0.5 * extent(); }

std::optional<Cell> GridSpec::cell_of(const Vec2& point) const {
  if (!contains(point)) return std::nullopt;
  const Vec2 rel = (point - origin) / cell_size;
  Cell c{static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y()))};
  c.x = std::min(c.x, n - 1);
  c.y = std::min(c.y, m - 1);
  return c;
}

Vec2 GridSpec::grid_coords(const Vec2& point) const {
  return (point - origin) / cell_size - Vec2(0.5, 0.5);
}

Heatmap::Heatmap(const GridSpec& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.cells()) {
    throw Error(ErrorCode::ShapeMismatch, "heatmap value count does not match grid");
  }
}

double Heatmap::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

GridError grid_error(const GridSpec& grid, const Cell& predicted, const Cell& truth) {
  GridError e;
  e.dx = std::abs(predicted.x - truth.x);
  e.dy = std::abs(predicted.y - truth.y);
  e.euclid = std::hypot(e.dx, e.dy);
  e.meters = (grid.cell_center(predicted) - grid.cell_center(truth)).norm();
  return e;
}

}  // namespace handover
