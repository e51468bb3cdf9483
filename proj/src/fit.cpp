#include "qresp/fit.hpp"

#include <cmath>

#include "qresp/error.hpp"

namespace qresp {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw FitError("fit_line: size mismatch");
  if (x.size() < 2) throw FitError("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ssr += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  if (ssr <= 1e-30 * (1.0 + syy)) f.r_squared = 1.0;
  f.points = static_cast<int>(x.size());
  return f;
}

}  // namespace qresp
