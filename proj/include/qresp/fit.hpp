#pragma once

#include <span>

namespace qresp {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Ordinary least squares y = slope x + intercept. r_squared is 1 when the
/// residual vanishes. Throws FitError for fewer than two points or constant x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace qresp
