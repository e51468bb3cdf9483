#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qresp/density.hpp"
#include "qresp/fourier.hpp"
#include "qresp/maps.hpp"
#include "qresp/transfer.hpp"

namespace qresp {

/**
 * L(J phi + V phi) for the fiber map at eps (default 0), where
 * J phi + V phi = -(phi dT/deps / T')' is sampled on the Q-grid from the
 * closed-form derivatives and pushed through the Koopman quadrature.
 * The result is returned with mean exactly 0.
 */
FourierFunction derivative_operator(const ParamCircleMap& map, const FourierFunction& phi, int Q = 0,
                                    double eps = 0.0);

/// -(S L f)' for T_eps = D_eps o T with D_eps(y) = y + eps S(y); A0 is the
/// matrix of T.
FourierFunction composed_derivative_operator(const TransferMatrix& A0, const FourierFunction& S,
                                             const FourierFunction& f, int Q = 0);

struct ResponseResult {
  FourierFunction h_hat;
  int fiber = 0;
  int series_depth = 0;         ///< N, terms n = 0..N
  double tail_estimate = 0.0;   ///< ||t_N|| rho / (1 - rho); infinite when rho >= 1
  double decay_factor = 0.0;    ///< fitted term ratio rho
  double observable_response = 0.0;
  bool has_observable = false;
  bool densities_converged = true;
  std::vector<double> term_norms;      ///< ||t_n||_{W^{1,1}}
  std::vector<FourierFunction> sources;  ///< Lhat_{sigma^{-(n+1)} omega} h_{sigma^{-(n+1)} omega}
};

struct ResponseOptions {
  /// Number of terms minus one; negative selects the depth automatically
  /// (two consecutive terms below term_tol, at most max_terms and half the
  /// window behind the fiber).
  int N = -1;
  double term_tol = 1e-12;
  int max_terms = 64;
  std::optional<FourierFunction> observable;
  DensityOptions density;
};

/// Supplies h_{omega', 0} on request; the default pulls back along the orbit.
using DensityProvider = std::function<FourierFunction(int fiber)>;

/// sum_{n=0}^{N} L^n_{sigma^{-n} omega} Lhat_{sigma^{-(n+1)} omega} h_{sigma^{-(n+1)} omega}, all at eps = 0.
ResponseResult response_series(const DrivingOrbit& orbit, int fiber, const Discretization& disc,
                               const ResponseOptions& opt = {}, DensityProvider densities = {});

using ResponseObserver = std::function<void(const ResponseResult&)>;
/// Returns the observer it replaces.
ResponseObserver set_response_observer(ResponseObserver obs);

struct KoopmanResult {
  double value = 0.0;
  std::vector<double> terms;
  int modes = 0;  ///< truncation of phi o T^n that was used
  bool resolved = false;
};

/// sum_n int phi o T^n_{sigma^{-n} omega} Lhat h dm. phi o T^n is built one
/// fiber at a time by pointwise composition and projection onto K modes; K
/// doubles from 2M until successive totals agree to 1e-13.
KoopmanResult koopman_observable_response(const DrivingOrbit& orbit, const ResponseResult& series,
                                          const FourierFunction& phi, int max_modes = 1024);

struct RateFit {
  std::vector<double> eps_list;
  std::vector<double> errors;
  double fitted_exponent = 0.0;
  double fitted_prefactor = 0.0;
  double r_squared = 0.0;
  int fit_points = 0;
  /// every error vanished (below 1e-13): the fit is degenerate and reported as exact
  bool exact = false;
  bool refused = false;
  std::string reason;
  /// errors strictly decrease as |eps| decreases
  bool monotone = false;
};

/// Log-log least squares of errors against |eps|, skipping zero errors.
RateFit fit_rate(std::vector<double> eps_list, std::vector<double> errors);

/// 2^{-3}, ..., 2^{-10} times eps0.
std::vector<double> dyadic_eps_grid(double eps0 = 1.0, int from = 3, int to = 10);

/// ||h_{omega, eps_k} - h_{omega, 0}||_{W^{ell,1}} against |eps_k|. Refuses
/// (refused = true) when any density fails to converge.
RateFit stability_rate(const DrivingOrbit& orbit, int fiber, const std::vector<double>& eps_list, int ell,
                       const Discretization& disc, const DensityOptions& dopt = {}, int threads = 1);

struct ResponseValidation {
  RateFit fit;
  double observable_fd = 0.0;      ///< central difference of int phi h_eps at the smallest |eps|
  double observable_series = 0.0;  ///< int phi h_hat
  bool has_observable = false;
};

/// ||(h_{eps_k} - h_0)/eps_k - h_hat||_{W^{1,1}} against |eps_k|.
ResponseValidation response_validation(const DrivingOrbit& orbit, int fiber, const std::vector<double>& eps_list,
                                       const ResponseResult& response, const Discretization& disc,
                                       const DensityOptions& dopt = {},
                                       std::optional<FourierFunction> phi = {}, int threads = 1);

/// ||(L_eps - L_0) phi / eps - Lhat phi||_{W^{1,1}} against |eps|.
RateFit taylor_check(const ParamCircleMap& map, const FourierFunction& phi, const std::vector<double>& eps_list,
                     const Discretization& disc);

/// max over unit W^{ell+1,1} tests of ||(L_eps - L_0) f||_{W^{ell,1}} against |eps|.
RateFit perturbation_norms(const ParamCircleMap& map, const std::vector<double>& eps_list, int ell, int trials,
                           const Discretization& disc, std::uint64_t seed = 17);

}  // namespace qresp
