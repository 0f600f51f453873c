#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcufit/dataset.hpp"

namespace mcufit::linear {

struct Fit {
  std::vector<double> coefficients;  // length d
  double intercept = 0.0;
  bool ridge = false;     // system was rank deficient, damped solve used
  double sse = 0.0;       // training sum of squared residuals
};

/// Ordinary least squares of the target on all features of the given rows
/// (optionally standardized first). Rank-deficient systems fall back to the
/// ridge-damped normal equations with damping 1e-8.
Fit least_squares(const Dataset& ds, std::span<const std::size_t> rows,
                  const Normalization* standardize = nullptr);

}  // namespace mcufit::linear
