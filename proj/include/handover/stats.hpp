#pragma once

#include <cstddef>
#include <span>

namespace handover {

struct MannWhitneyResult {
  double u = 0.0;  // U of the first sample
  double z = 0.0;
  double p = 1.0;  // two-sided
};

/// Two-sided Mann-Whitney U test, normal approximation with tie-corrected
/// variance and no continuity correction. Throws TooFewSamples when either
/// sample has fewer than two values.
MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b);

/// p-value of mann_whitney(a, b).
double significance(std::span<const double> a, std::span<const double> b);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

/// Quartiles by linear interpolation between order statistics.
Summary summarize(std::span<const double> values);

}  // namespace handover
