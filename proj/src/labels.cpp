#include "handover/labels.hpp"

#include <cmath>
#include <numbers>

namespace handover {

void LabelParams::validate() const {
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0) || !(steepness > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "label sigmas and steepness must be positive");
  }
}

double confidence_weight(double t, double T, double steepness) {
  return 1.0 - std::exp(-steepness * t / T);
}

Heatmap make_label(const Vec2& target, const GridSpec& grid, const LabelParams& params, double t,
                   double T) {
  params.validate();
  if (!(target.x() >= 0.0 && target.x() <= grid.n - 1 && target.y() >= 0.0 &&
        target.y() <= grid.m - 1)) {
    throw Error(ErrorCode::TargetOutOfGrid, "label target outside the grid");
  }
  Heatmap label(grid);
  const double norm = 1.0 / (2.0 * std::numbers::pi * params.sigma_x * params.sigma_y);
  double peak = 0.0;
  for (int x = 0; x < grid.n; ++x) {
    for (int y = 0; y < grid.m; ++y) {
      const double ex = (x - target.x()) / params.sigma_x;
      const double ey = (y - target.y()) / params.sigma_y;
      const double v = norm * std::exp(-0.5 * ex * ex - 0.5 * ey * ey);
      label.at(x, y) = v;
      peak = std::max(peak, v);
    }
  }
  const double scale = confidence_weight(t, T, params.steepness) / peak;
  for (double& v : label.values()) v *= scale;
  return label;
}

double sequence_loss(std::span<const Heatmap> preds, std::span<const Heatmap> labels,
                     double steepness) {
  if (preds.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and label sequences differ in length");
  }
  const double T = static_cast<double>(preds.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    if (!(preds[t].grid() == labels[t].grid())) {
      throw Error(ErrorCode::ShapeMismatch, "prediction and label grids differ");
    }
    const auto p = preds[t].values();
    const auto l = labels[t].values();
    double step = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = l[i] - p[i];
      step += d * d;
    }
    loss += step * confidence_weight(static_cast<double>(t), T, steepness);
  }
  return loss;
}

}  // namespace handover
