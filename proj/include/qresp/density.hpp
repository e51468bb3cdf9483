#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qresp/fit.hpp"
#include "qresp/fourier.hpp"
#include "qresp/maps.hpp"
#include "qresp/transfer.hpp"

namespace qresp {

struct Discretization {
  int M = 32;
  int Q = 0;  ///< 0 selects default_quadrature(M)
  TransferCache* cache = nullptr;

  int quadrature() const { return Q > 0 ? Q : default_quadrature(M); }
  TransferCache& transfer_cache() const { return cache ? *cache : default_cache(); }
};

struct DensityResult {
  FourierFunction h;
  int fiber = 0;
  double eps = 0.0;
  int pullback_depth = 0;
  double cauchy_defect = 0.0;  ///< ||h_n - h_{n-1}||_{W^{ell_check,1}} at the last step
  bool converged = false;
  std::vector<double> defect_history;
  /// Largest |mean - 1| of an iterate before renormalization.
  double mass_drift = 0.0;
  /// Minimum of h on the quadrature grid.
  double grid_min = 0.0;
  /// max over the trajectory of ||h_n||_{W^{ell_check,1}}
  double trajectory_norm_max = 0.0;
};

struct DensityOptions {
  double tol = 1e-9;
  int ell_check = 1;
  /// Starting function (normalized to mean 1); the constant 1 when empty.
  std::optional<FourierFunction> initial;
  /// Consecutive steps with defect below tol required to stop.
  int confirm = 2;
  /// Pullback depth limit; the window bound when negative.
  int max_depth = -1;
};

/// h_n = L^n_{sigma^{-n} omega} h_0, renormalized each step, until the Cauchy
/// defect stays below tol. Non-convergence is flagged, not thrown.
DensityResult equivariant_density(const DrivingOrbit& orbit, double eps, int fiber, const Discretization& disc,
                                  const DensityOptions& opt = {});

/// Densities at fibers first..last: a pullback at `first`, then forward
/// propagation h_{n+1} = L_n h_n.
std::vector<DensityResult> density_path(const DrivingOrbit& orbit, double eps, int first, int last,
                                        const Discretization& disc, const DensityOptions& opt = {});

/// ||L_fiber h_prev - h_next||_{W^{1,1}}.
double equivariance_residual(const DrivingOrbit& orbit, double eps, int fiber, const DensityResult& h_prev,
                             const DensityResult& h_next, const Discretization& disc);

/// Receives every DensityResult produced by the solver (used by audits).
using DensityObserver = std::function<void(const DensityResult&)>;
/// Returns the observer it replaces.
DensityObserver set_density_observer(DensityObserver obs);

struct DecayReport {
  std::vector<double> rates;      ///< fitted slope of log ||L^n f|| per test
  std::vector<double> r_squared;  ///< per test
  std::vector<int> fit_points;
  std::vector<std::vector<double>> norms;  ///< ||L^n f||_{W^{ell,1}}, n = 0..n_max
  double lambda_hat = 0.0;  ///< -max rate
  double K_hat = 0.0;       ///< exp(intercept) of the slowest test
  bool short_fit = false;   ///< some fit used fewer than 5 points
};

/// Forward decay of mean-zero functions from `fiber`. Each sequence is fitted
/// on its second half up to the point where it falls to 1e-13 of its start.
DecayReport decay_rate(const DrivingOrbit& orbit, double eps, int fiber, int ell, int n_max, int tests,
                       const Discretization& disc, std::uint64_t seed = 11);
DecayReport decay_rate(const DrivingOrbit& orbit, double eps, int fiber, int ell, int n_max,
                       const std::vector<FourierFunction>& tests, const Discretization& disc);

struct BoundednessReport {
  std::vector<double> values;  ///< ||L^n_{sigma^{-n} omega} f||_{W^{ell,1}}, n = 0..n_max
  double D_hat = 0.0;          ///< max of values
  bool bounded = false;        ///< last-quartile mean <= 2 x max over the first three quartiles
};

/// Pullback images of a test function with ||f||_{W^{ell,1}} = 1; random when f is empty.
BoundednessReport backward_boundedness(const DrivingOrbit& orbit, double eps, int fiber, int ell, int n_max,
                                       const Discretization& disc, std::optional<FourierFunction> f = {},
                                       std::uint64_t seed = 13);

struct TemperednessReport {
  double K_a = 0.0;
  bool sublinear_ok = false;
  std::vector<double> shell_max;  ///< max |log s(n)| / (1+|n|) over dyadic shells of |n|
};

/// series[i] is s(n) for n = i - N. Throws DomainError on nonpositive entries.
TemperednessReport temperedness_diagnostic(const std::vector<double>& series, double a);

struct LyapunovReport {
  double exponent = 0.0;
  double r_squared = 0.0;
  std::vector<double> log_norms;  ///< n = 1..n_max
};

/// Slope of log ||L^n_omega||_{W^{ell,1}} (operator_norm_estimate) over the second half of n = 1..n_max.
LyapunovReport lyapunov_top(const DrivingOrbit& orbit, double eps, int start, int ell, int n_max, int trials,
                            const Discretization& disc);

/// Least-squares fit of log values vs n for n in [lo, hi].
LineFit fit_log_sequence(const std::vector<double>& values, int lo, int hi);

}  // namespace qresp
