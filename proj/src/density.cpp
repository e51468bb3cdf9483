#include "qresp/density.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>

#include "qresp/error.hpp"
#include "qresp/rng.hpp"

namespace qresp {

namespace {

std::mutex observer_mu;
DensityObserver observer;

void notify(const DensityResult& r) {
  DensityObserver obs;
  {
    std::lock_guard lock(observer_mu);
    obs = observer;
  }
  if (obs) obs(r);
}

FourierFunction mat_apply(const Eigen::MatrixXcd& P, const FourierFunction& f) {
  Eigen::Map<const Eigen::VectorXcd> v(f.coeffs().data(), static_cast<Eigen::Index>(f.coeffs().size()));
  Eigen::VectorXcd w = P * v;
  return FourierFunction::symmetrized(f.modes(), std::vector<cplx>(w.data(), w.data() + w.size()));
}

double grid_minimum(const FourierFunction& h, int Q) { return grid_range(h, Q).first; }

}  // namespace

DensityObserver set_density_observer(DensityObserver obs) {
  std::lock_guard lock(observer_mu);
  std::swap(observer, obs);
  return obs;
}

DensityResult equivariant_density(const DrivingOrbit& orbit, double eps, int fiber, const Discretization& disc,
                                  const DensityOptions& opt) {
  if (!orbit.contains(fiber)) throw WindowError("equivariant_density: fiber outside the window");
  const int M = disc.M;
  const int Q = disc.quadrature();
  FourierFunction h0 = opt.initial ? opt.initial->resized(M) : FourierFunction::constant(M, 1.0);
  if (!(h0.mean() > 0.0)) throw DomainError("equivariant_density: initial function must have positive mean");
  h0 *= 1.0 / h0.mean();

  int limit = fiber + orbit.window();
  if (opt.max_depth >= 0) limit = std::min(limit, opt.max_depth);

  DensityResult r;
  r.fiber = fiber;
  r.eps = eps;
  r.h = h0;
  r.trajectory_norm_max = sobolev_norm(h0, opt.ell_check, Q, L1Rule::Exact);
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(2 * M + 1, 2 * M + 1);
  bool P_identity = true;
  int below = 0;
  for (int n = 1; n <= limit; ++n) {
    const auto A = disc.transfer_cache().get(orbit.fiber(fiber - n), eps, M, Q);
    if (!A->identity_like) {
      P = P_identity ? A->A : Eigen::MatrixXcd(P * A->A);
      P_identity = false;
    }
    FourierFunction hn = P_identity ? h0 : mat_apply(P, h0);
    const double mean = hn.mean();
    r.mass_drift = std::max(r.mass_drift, std::abs(mean - 1.0));
    hn *= 1.0 / mean;
    const double defect = sobolev_norm(hn - r.h, opt.ell_check, Q, L1Rule::Exact);
    r.defect_history.push_back(defect);
    r.trajectory_norm_max = std::max(r.trajectory_norm_max, sobolev_norm(hn, opt.ell_check, Q, L1Rule::Exact));
    r.h = std::move(hn);
    r.pullback_depth = n;
    r.cauchy_defect = defect;
    below = defect < opt.tol ? below + 1 : 0;
    if (below >= opt.confirm) {
      r.converged = true;
      break;
    }
  }
  r.grid_min = grid_minimum(r.h, Q);
  notify(r);
  return r;
}

std::vector<DensityResult> density_path(const DrivingOrbit& orbit, double eps, int first, int last,
                                        const Discretization& disc, const DensityOptions& opt) {
  if (last < first) throw DomainError("density_path: last < first");
  if (!orbit.contains(last)) throw WindowError("density_path: fiber outside the window");
  std::vector<DensityResult> out;
  out.push_back(equivariant_density(orbit, eps, first, disc, opt));
  const int Q = disc.quadrature();
  for (int n = first; n < last; ++n) {
    const DensityResult& prev = out.back();
    const auto A = disc.transfer_cache().get(orbit.fiber(n), eps, disc.M, Q);
    DensityResult r = prev;
    r.defect_history.clear();
    FourierFunction h = apply(*A, prev.h);
    const double mean = h.mean();
    r.mass_drift = std::max(prev.mass_drift, std::abs(mean - 1.0));
    h *= 1.0 / mean;
    r.h = std::move(h);
    r.fiber = n + 1;
    r.pullback_depth = prev.pullback_depth + 1;
    r.trajectory_norm_max = std::max(prev.trajectory_norm_max, sobolev_norm(r.h, opt.ell_check, Q, L1Rule::Exact));
    r.grid_min = grid_minimum(r.h, Q);
    notify(r);
    out.push_back(std::move(r));
  }
  return out;
}

double equivariance_residual(const DrivingOrbit& orbit, double eps, int fiber, const DensityResult& h_prev,
                             const DensityResult& h_next, const Discretization& disc) {
  const auto A = disc.transfer_cache().get(orbit.fiber(fiber), eps, disc.M, disc.quadrature());
  return sobolev_norm(apply(*A, h_prev.h) - h_next.h, 1, disc.quadrature(), L1Rule::Exact);
}

LineFit fit_log_sequence(const std::vector<double>& values, int lo, int hi) {
  std::vector<double> x, y;
  for (int n = lo; n <= hi; ++n) {
    x.push_back(n);
    y.push_back(std::log(std::max(values[static_cast<std::size_t>(n)], 1e-300)));
  }
  return fit_line(x, y);
}

DecayReport decay_rate(const DrivingOrbit& orbit, double eps, int fiber, int ell, int n_max,
                       const std::vector<FourierFunction>& tests, const Discretization& disc) {
  if (n_max < 1) throw DomainError("decay_rate: n_max must be positive");
  if (!orbit.contains(fiber) || !orbit.contains(fiber + n_max - 1)) {
    throw WindowError("decay_rate: forward trajectory leaves the window");
  }
  const int Q = disc.quadrature();
  DecayReport rep;
  double slowest = -HUGE_VAL;
  for (const auto& f0 : tests) {
    if (std::abs(f0.mean()) > 1e-12) throw DomainError("decay_rate: test functions must have mean zero");
    FourierFunction f = f0.resized(disc.M);
    std::vector<double> a{sobolev_norm(f, ell, Q, L1Rule::Exact)};
    for (int n = 1; n <= n_max; ++n) {
      const auto A = disc.transfer_cache().get(orbit.fiber(fiber + n - 1), eps, disc.M, Q);
      f = apply(*A, f).with_mean(0.0);
      a.push_back(sobolev_norm(f, ell, Q, L1Rule::Exact));
    }
    const double floor = 1e-13 * a[0];
    int n_end = n_max;
    for (int n = 0; n <= n_max; ++n) {
      if (a[static_cast<std::size_t>(n)] <= floor) {
        a[static_cast<std::size_t>(n)] = floor;
        n_end = n;
        break;
      }
    }
    const int start = std::max(0, std::min(n_end / 2, n_end - 4));
    LineFit fit;
    if (n_end - start >= 1) {
      fit = fit_log_sequence(a, start, n_end);
    } else {
      fit.r_squared = 1.0;
      fit.points = 1;
    }
    rep.short_fit = rep.short_fit || fit.points < 5;
    rep.rates.push_back(fit.slope);
    rep.r_squared.push_back(fit.r_squared);
    rep.fit_points.push_back(fit.points);
    rep.norms.push_back(std::move(a));
    if (fit.slope > slowest) {
      slowest = fit.slope;
      rep.K_hat = std::exp(fit.intercept);
    }
  }
  rep.lambda_hat = tests.empty() ? 0.0 : -slowest;
  return rep;
}

DecayReport decay_rate(const DrivingOrbit& orbit, double eps, int fiber, int ell, int n_max, int tests,
                       const Discretization& disc, std::uint64_t seed) {
  if (tests < 1) throw DomainError("decay_rate: need at least one test function");
  Rng rng(seed);
  std::vector<FourierFunction> fs;
  for (int t = 0; t < tests; ++t) fs.push_back(random_function(disc.M, rng, 1.5, true));
  return decay_rate(orbit, eps, fiber, ell, n_max, fs, disc);
}

BoundednessReport backward_boundedness(const DrivingOrbit& orbit, double eps, int fiber, int ell, int n_max,
                                       const Discretization& disc, std::optional<FourierFunction> f,
                                       std::uint64_t seed) {
  if (n_max < 4) throw DomainError("backward_boundedness: n_max must be >= 4");
  if (!orbit.contains(fiber) || !orbit.contains(fiber - n_max)) {
    throw WindowError("backward_boundedness: pullback leaves the window");
  }
  const int M = disc.M;
  const int Q = disc.quadrature();
  FourierFunction g;
  if (f) {
    g = f->resized(M);
  } else {
    Rng rng(seed);
    g = random_function(M, rng, 1.5, false);
  }
  const double norm = sobolev_norm(g, ell, Q, L1Rule::Exact);
  if (!(norm > 0.0)) throw DomainError("backward_boundedness: zero test function");
  g *= 1.0 / norm;

  BoundednessReport rep;
  rep.values.push_back(1.0);
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(2 * M + 1, 2 * M + 1);
  for (int n = 1; n <= n_max; ++n) {
    const auto A = disc.transfer_cache().get(orbit.fiber(fiber - n), eps, M, Q);
    if (!A->identity_like) P = P * A->A;
    rep.values.push_back(sobolev_norm(mat_apply(P, g), ell, Q, L1Rule::Exact));
  }
  rep.D_hat = *std::max_element(rep.values.begin(), rep.values.end());
  const std::size_t q3 = (rep.values.size() * 3) / 4;
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < q3; ++i) early = std::max(early, rep.values[i]);
  for (std::size_t i = q3; i < rep.values.size(); ++i) late += rep.values[i];
  late /= static_cast<double>(rep.values.size() - q3);
  rep.bounded = late <= 2.0 * early;
  return rep;
}

TemperednessReport temperedness_diagnostic(const std::vector<double>& series, double a) {
  if (series.empty() || series.size() % 2 == 0) {
    throw DomainError("temperedness_diagnostic: series must have odd length 2N+1");
  }
  if (!(a > 0.0)) throw DomainError("temperedness_diagnostic: a must be positive");
  const int N = static_cast<int>(series.size() / 2);
  TemperednessReport rep;
  for (int n = -N; n <= N; ++n) {
    const double s = series[static_cast<std::size_t>(n + N)];
    if (!(s > 0.0)) throw DomainError("temperedness_diagnostic: entries must be positive");
    rep.K_a = std::max(rep.K_a, s * std::exp(-a * std::abs(n)));
    const int m = std::abs(n);
    const int shell = m == 0 ? 0 : std::bit_width(static_cast<unsigned>(m));
    if (static_cast<int>(rep.shell_max.size()) <= shell) rep.shell_max.resize(static_cast<std::size_t>(shell + 1), 0.0);
    auto& v = rep.shell_max[static_cast<std::size_t>(shell)];
    v = std::max(v, std::abs(std::log(s)) / (1.0 + m));
  }
  const double vmax = *std::max_element(rep.shell_max.begin(), rep.shell_max.end());
  if (vmax <= 1e-12) {
    rep.sublinear_ok = true;
  } else if (rep.shell_max.size() >= 2) {
    const double earlier = *std::max_element(rep.shell_max.begin(), rep.shell_max.end() - 1);
    rep.sublinear_ok = rep.shell_max.back() <= 0.5 * earlier;
  }
  return rep;
}

LyapunovReport lyapunov_top(const DrivingOrbit& orbit, double eps, int start, int ell, int n_max, int trials,
                            const Discretization& disc) {
  if (n_max < 2) throw DomainError("lyapunov_top: n_max must be >= 2");
  if (!orbit.contains(start) || !orbit.contains(start + n_max - 1)) {
    throw WindowError("lyapunov_top: forward trajectory leaves the window");
  }
  NormEstimateOptions opt;
  opt.trials = trials;
  opt.Q = disc.quadrature();
  LyapunovReport rep;
  TransferMatrix P = TransferMatrix::identity(disc.M);
  for (int n = 1; n <= n_max; ++n) {
    const auto A = disc.transfer_cache().get(orbit.fiber(start + n - 1), eps, disc.M, disc.quadrature());
    if (!A->identity_like) P = then(P, *A);
    rep.log_norms.push_back(std::log(operator_norm_estimate(P, ell, opt)));
  }
  std::vector<double> x, y;
  for (int n = (n_max + 1) / 2; n <= n_max; ++n) {
    x.push_back(n);
    y.push_back(rep.log_norms[static_cast<std::size_t>(n - 1)]);
  }
  const auto fit = fit_line(x, y);
  rep.exponent = fit.slope;
  rep.r_squared = fit.r_squared;
  return rep;
}

}  // namespace qresp
