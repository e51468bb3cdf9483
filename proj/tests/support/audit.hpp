#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <string>

#include "qresp/density.hpp"
#include "qresp/response.hpp"

namespace qresp::testing {

/// Collects conservation and positivity violations from every density and
/// response computed while installed.
class Audit {
 public:
  static constexpr double kMassTol = 1e-9;
  static constexpr double kPositivityTol = -1e-6;
  static constexpr double kMeanTol = 1e-9;

  void install() {
    set_density_observer([this](const DensityResult& r) { record(r); });
    set_response_observer([this](const ResponseResult& r) { record(r); });
  }
  void uninstall() {
    set_density_observer({});
    set_response_observer({});
  }

  void record(const DensityResult& r) {
    ++densities;
    const double mass = std::abs(r.h.mean() - 1.0);
    worst_mass = std::max(worst_mass.load(), std::max(mass, r.mass_drift));
    if (mass > kMassTol || r.mass_drift > kMassTol || r.grid_min < kPositivityTol) fail("density", r.fiber, r.eps);
  }
  void record(const ResponseResult& r) {
    ++responses;
    const double m = std::abs(r.h_hat.mean());
    worst_mean = std::max(worst_mean.load(), m);
    if (m > kMeanTol) fail("response", r.fiber, 0.0);
  }

  int violations() const { return violations_; }
  std::string first_violation() const {
    std::lock_guard lock(mu_);
    return first_;
  }

  std::atomic<long> densities{0};
  std::atomic<long> responses{0};
  std::atomic<double> worst_mass{0.0};
  std::atomic<double> worst_mean{0.0};

 private:
  void fail(const char* what, int fiber, double eps) {
    std::lock_guard lock(mu_);
    if (violations_++ == 0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s at fiber %d, eps %g", what, fiber, eps);
      first_ = buf;
    }
  }

  mutable std::mutex mu_;
  int violations_ = 0;
  std::string first_;
};

}  // namespace qresp::testing
