#pragma once

#include <span>

#include "handover/heatmap.hpp"

namespace handover {

inline constexpr double kConfidenceSteepness = 5.0;

/// Gaussian label smoothing widths, in grid cells.
struct LabelParams {
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double steepness = kConfidenceSteepness;

  void validate() const;
};

/// c_t = 1 - exp(-steepness * t / T). Ramps from 0 so early steps carry no
/// confidence in either the label or the loss.
double confidence_weight(double t, double T, double steepness = kConfidenceSteepness);

/// Smoothed label for a target at continuous grid coordinates (cell centers at
/// integers): a 2-D Gaussian sampled at cell indices, rescaled so its maximum is
/// 1, then multiplied by c_t. Throws TargetOutOfGrid.
Heatmap make_label(const Vec2& target, const GridSpec& grid, const LabelParams& params, double t,
                   double T);

/// sum_t c_t * sum_cells (l_t - p_t)^2 with T = preds.size(). The per-cell
/// squared errors are summed, not averaged. Throws ShapeMismatch.
double sequence_loss(std::span<const Heatmap> preds, std::span<const Heatmap> labels,
                     double steepness = kConfidenceSteepness);

}  // namespace handover
