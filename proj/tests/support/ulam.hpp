#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qresp/maps.hpp"

namespace qresp::testing {

/// Piecewise-constant invariant density of a monotone degree-d lift by Ulam's
/// method on `bins` equal cells, with cell boundaries pulled back exactly.
class UlamOracle {
 public:
  UlamOracle(const ParamCircleMap& map, double eps, int bins, int iterations = 400) : n_(bins) {
    const double c = map.lift(eps, 0.0);
    const double d = map.degree();
    // breakpoints 0 = x_0 < ... < 1 where T crosses a multiple of 1/n
    std::vector<double> xs{0.0};
    const long lo = static_cast<long>(std::floor(c * n_)) + 1;
    const long hi = static_cast<long>(std::ceil((c + d) * n_)) - 1;
    for (long k = lo; k <= hi; ++k) xs.push_back(invert(map, eps, static_cast<double>(k) / n_));
    xs.push_back(1.0);
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
      const double a = xs[s], b = xs[s + 1];
      if (b <= a) continue;
      const double y = map.lift(eps, 0.5 * (a + b));
      const long j = ((static_cast<long>(std::floor(y * n_)) % n_) + n_) % n_;
      // split [a, b] along source cells
      double x = a;
      while (x < b) {
        const long i = std::min<long>(static_cast<long>(std::floor(x * n_)), n_ - 1);
        const double e = std::min(b, static_cast<double>(i + 1) / n_);
        if (e > x) pieces_.push_back({static_cast<int>(i), static_cast<int>(j), e - x});
        if (e <= x) break;
        x = e;
      }
    }
    density_.assign(static_cast<std::size_t>(n_), 1.0);
    std::vector<double> next(density_.size());
    for (int it = 0; it < iterations; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (const auto& p : pieces_) next[p.to] += density_[p.from] * p.length * n_;
      double mass = 0.0;
      for (double v : next) mass += v;
      mass /= n_;
      for (std::size_t i = 0; i < next.size(); ++i) density_[i] = next[i] / mass;
    }
  }

  int bins() const { return n_; }
  const std::vector<double>& density() const { return density_; }

  /// int |h - p| dm with four midpoint samples per cell.
  template <class F>
  double l1_distance(const F& h) const {
    double acc = 0.0;
    for (int i = 0; i < n_; ++i) {
      for (int s = 0; s < 4; ++s) acc += std::abs(h((i + (s + 0.5) / 4.0) / n_) - density_[i]);
    }
    return acc / (4.0 * n_);
  }

 private:
  struct Piece {
    int from, to;
    double length;
  };

  static double invert(const ParamCircleMap& map, double eps, double y) {
    double a = 0.0, b = 1.0;
    for (int k = 0; k < 200 && b - a > 1e-16; ++k) {
      const double m = 0.5 * (a + b);
      (map.lift(eps, m) < y ? a : b) = m;
    }
    return 0.5 * (a + b);
  }

  int n_;
  std::vector<Piece> pieces_;
  std::vector<double> density_;
};

}  // namespace qresp::testing
