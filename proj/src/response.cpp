#include "qresp/response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "qresp/error.hpp"
#include "qresp/fit.hpp"
#include "qresp/parallel.hpp"
#include "qresp/rng.hpp"

namespace qresp {

namespace {

std::mutex observer_mu;
ResponseObserver observer;

void notify(const ResponseResult& r) {
  ResponseObserver obs;
  {
    std::lock_guard lock(observer_mu);
    obs = observer;
  }
  if (obs) obs(r);
}

double reduce(double y) { return y - std::floor(y); }

void check_eps_list(const std::vector<double>& eps_list, const char* who) {
  if (eps_list.size() < 3) throw DomainError(std::string(who) + ": need at least 3 eps values");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (eps_list[i] == 0.0) throw DomainError(std::string(who) + ": eps values must be nonzero");
    if (i > 0 && !(std::abs(eps_list[i]) < std::abs(eps_list[i - 1]))) {
      throw DomainError(std::string(who) + ": eps list must be strictly decreasing in magnitude");
    }
  }
}

void check_admissible_eps(const DrivingOrbit& orbit, const std::vector<double>& eps_list) {
  double emax = std::numeric_limits<double>::infinity();
  for (int n = -orbit.window(); n <= orbit.window(); ++n) {
    const auto& m = orbit.fiber(n);
    if (m.eps_dependent()) emax = std::min(emax, m.eps_max());
  }
  for (double e : eps_list) {
    if (std::abs(e) > emax) {
      throw DomainError("eps = " + std::to_string(e) + " exceeds the admissible range " + std::to_string(emax));
    }
  }
}

}  // namespace

FourierFunction derivative_operator(const ParamCircleMap& map, const FourierFunction& phi, int Q, double eps) {
  if (!map.has_eps_derivatives()) throw DomainError(map.name() + ": derivative operator needs eps-derivatives");
  const int M = phi.modes();
  if (Q <= 0) Q = default_quadrature(M);
  const auto f = phi.sample(Q, 0);
  const auto fp = phi.sample(Q, 1);
  std::vector<double> g(static_cast<std::size_t>(Q));
  for (int q = 0; q < Q; ++q) {
    const double x = static_cast<double>(q) / Q;
    const double a = map.de(eps, x);
    const double ap = map.dedx(eps, x);
    const double t1 = map.dx(eps, x, 1);
    const double t2 = map.dx(eps, x, 2);
    const auto i = static_cast<std::size_t>(q);
    g[i] = -(fp[i] * a / t1 + f[i] * ap / t1 - f[i] * a * t2 / (t1 * t1));
  }
  return transfer_samples(map, eps, g, M).with_mean(0.0);
}

FourierFunction composed_derivative_operator(const TransferMatrix& A0, const FourierFunction& S,
                                             const FourierFunction& f, int Q) {
  const int M = A0.M;
  if (Q <= 0) Q = default_quadrature(M);
  if (Q < 2 * (M + S.modes()) + 1) throw AliasingError("composed_derivative_operator: grid too coarse");
  const auto Lf = apply(A0, f);
  const auto prod = multiply_on_grid(Lf, S.sample(Q, 0), M);
  return (prod.derivative(1) * -1.0).with_mean(0.0);
}

ResponseObserver set_response_observer(ResponseObserver obs) {
  std::lock_guard lock(observer_mu);
  std::swap(observer, obs);
  return obs;
}

ResponseResult response_series(const DrivingOrbit& orbit, int fiber, const Discretization& disc,
                               const ResponseOptions& opt, DensityProvider densities) {
  if (!orbit.contains(fiber)) throw WindowError("response_series: fiber outside the window");
  const int M = disc.M;
  const int Q = disc.quadrature();
  const int available = fiber + orbit.window() - 1;  // n + 1 <= fiber + N
  // The automatic depth keeps half of the window for the density pullback.
  const int N_cap = opt.N >= 0 ? opt.N : std::min(opt.max_terms - 1, available / 2);
  if (N_cap < 0 || N_cap > available) {
    throw WindowError("response_series: window too shallow for " + std::to_string(N_cap + 1) + " terms");
  }

  ResponseResult r;
  r.fiber = fiber;
  std::map<int, FourierFunction> path;
  if (!densities) {
    // One pullback at the deepest fiber, then forward propagation.
    const auto hs = density_path(orbit, 0.0, fiber - N_cap - 1, fiber - 1, disc, opt.density);
    r.densities_converged = hs.front().converged;
    for (const auto& d : hs) path.emplace(d.fiber, d.h);
    densities = [&path](int n) { return path.at(n); };
  }

  FourierFunction sum(M);
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(2 * M + 1, 2 * M + 1);
  bool P_identity = true;
  int below = 0;
  for (int n = 0; n <= N_cap; ++n) {
    if (n > 0) {
      const auto A = disc.transfer_cache().get(orbit.fiber(fiber - n), 0.0, M, Q);
      if (!A->identity_like) {
        P = P_identity ? A->A : Eigen::MatrixXcd(P * A->A);
        P_identity = false;
      }
    }
    const int src = fiber - n - 1;
    auto g = derivative_operator(orbit.fiber(src), densities(src).resized(M), Q);
    FourierFunction t = g;
    if (!P_identity) {
      Eigen::Map<const Eigen::VectorXcd> v(g.coeffs().data(), 2 * M + 1);
      Eigen::VectorXcd w = P * v;
      t = FourierFunction::symmetrized(M, std::vector<cplx>(w.data(), w.data() + w.size()));
    }
    sum += t;
    r.term_norms.push_back(sobolev_norm(t, 1, Q, L1Rule::Exact));
    r.sources.push_back(std::move(g));
    r.series_depth = n;
    below = r.term_norms.back() < opt.term_tol ? below + 1 : 0;
    if (opt.N < 0 && below >= 2) break;
  }
  r.h_hat = std::move(sum);

  // Geometric tail from the second half of the term norms.
  std::vector<double> x, y;
  for (std::size_t n = r.term_norms.size() / 2; n < r.term_norms.size(); ++n) {
    if (r.term_norms[n] > 1e-300) {
      x.push_back(static_cast<double>(n));
      y.push_back(std::log(r.term_norms[n]));
    }
  }
  const double last = r.term_norms.back();
  if (last <= 1e-300) {
    r.decay_factor = 0.0;
    r.tail_estimate = 0.0;
  } else if (x.size() >= 2) {
    r.decay_factor = std::exp(fit_line(x, y).slope);
    r.tail_estimate = r.decay_factor < 1.0 ? last / (1.0 - r.decay_factor) : HUGE_VAL;
  } else {
    r.decay_factor = 0.0;
    r.tail_estimate = last;
  }
  if (opt.observable) {
    r.has_observable = true;
    r.observable_response = opt.observable->resized(M).inner(r.h_hat);
  }
  notify(r);
  return r;
}

namespace {

/// Pi_K (u o T) by sampling on a grid fine enough for degree-d images of K modes.
FourierFunction compose_project(const FourierFunction& u, const ParamCircleMap& map, int K) {
  const int Q = std::max(default_quadrature(K), 4 * (map.degree() + 1) * K + 4);
  std::vector<double> s(static_cast<std::size_t>(Q));
  for (int q = 0; q < Q; ++q) s[static_cast<std::size_t>(q)] = u(reduce(map.lift(0.0, static_cast<double>(q) / Q)));
  return project(s, K);
}

std::vector<double> koopman_terms(const DrivingOrbit& orbit, const ResponseResult& series, const FourierFunction& phi,
                                  int K) {
  std::vector<double> terms;
  FourierFunction u = phi.resized(K);
  for (std::size_t n = 0; n < series.sources.size(); ++n) {
    if (n > 0) {
      const auto& map = orbit.fiber(series.fiber - static_cast<int>(n));
      if (map.name() != "identity") u = compose_project(u, map, K);
    }
    terms.push_back(u.inner(series.sources[n].resized(K)));
  }
  return terms;
}

}  // namespace

KoopmanResult koopman_observable_response(const DrivingOrbit& orbit, const ResponseResult& series,
                                          const FourierFunction& phi, int max_modes) {
  KoopmanResult out;
  int K = 2 * std::max(series.h_hat.modes(), phi.modes());
  auto prev = koopman_terms(orbit, series, phi, K);
  auto total = [](const std::vector<double>& t) {
    double v = 0.0;
    for (double x : t) v += x;
    return v;
  };
  out.resolved = false;
  while (2 * K <= max_modes) {
    K *= 2;
    auto cur = koopman_terms(orbit, series, phi, K);
    const bool agree = std::abs(total(cur) - total(prev)) <= 1e-13;
    prev = std::move(cur);
    if (agree) {
      out.resolved = true;
      break;
    }
  }
  out.modes = K;
  out.value = total(prev);
  out.terms = std::move(prev);
  return out;
}

RateFit fit_rate(std::vector<double> eps_list, std::vector<double> errors) {
  RateFit f;
  f.eps_list = std::move(eps_list);
  f.errors = std::move(errors);
  f.monotone = true;
  for (std::size_t i = 1; i < f.errors.size(); ++i) {
    if (!(f.errors[i] < f.errors[i - 1])) f.monotone = false;
  }
  std::vector<double> x, y;
  bool all_zero = true;
  for (std::size_t i = 0; i < f.errors.size(); ++i) {
    if (f.errors[i] > 1e-13) all_zero = false;
    if (f.errors[i] > 0.0) {
      x.push_back(std::log(std::abs(f.eps_list[i])));
      y.push_back(std::log(f.errors[i]));
    }
  }
  if (all_zero) {
    f.exact = true;
    f.monotone = true;
    f.r_squared = 1.0;
    f.fitted_exponent = HUGE_VAL;
    return f;
  }
  if (x.size() < 2) {
    f.refused = true;
    f.reason = "fewer than two nonzero errors";
    return f;
  }
  const auto line = fit_line(x, y);
  f.fitted_exponent = line.slope;
  f.fitted_prefactor = std::exp(line.intercept);
  f.r_squared = line.r_squared;
  f.fit_points = line.points;
  return f;
}

std::vector<double> dyadic_eps_grid(double eps0, int from, int to) {
  std::vector<double> out;
  for (int k = from; k <= to; ++k) out.push_back(eps0 * std::ldexp(1.0, -k));
  return out;
}

RateFit stability_rate(const DrivingOrbit& orbit, int fiber, const std::vector<double>& eps_list, int ell,
                       const Discretization& disc, const DensityOptions& dopt, int threads) {
  check_eps_list(eps_list, "stability_rate");
  check_admissible_eps(orbit, eps_list);
  const int Q = disc.quadrature();
  const auto h0 = equivariant_density(orbit, 0.0, fiber, disc, dopt);
  const int K = static_cast<int>(eps_list.size());
  std::vector<double> errors(eps_list.size());
  std::vector<char> ok(eps_list.size());
  parallel_for(K, threads, [&](int k) {
    const auto he = equivariant_density(orbit, eps_list[static_cast<std::size_t>(k)], fiber, disc, dopt);
    ok[static_cast<std::size_t>(k)] = he.converged;
    errors[static_cast<std::size_t>(k)] = sobolev_norm(he.h - h0.h, ell, Q, L1Rule::Exact);
  });
  bool converged = h0.converged;
  for (char c : ok) converged = converged && c;
  RateFit f = fit_rate(eps_list, std::move(errors));
  if (!converged) {
    f.refused = true;
    f.reason = "density did not converge";
  }
  return f;
}

ResponseValidation response_validation(const DrivingOrbit& orbit, int fiber, const std::vector<double>& eps_list,
                                       const ResponseResult& response, const Discretization& disc,
                                       const DensityOptions& dopt, std::optional<FourierFunction> phi,
                                       int threads) {
  check_eps_list(eps_list, "response_validation");
  check_admissible_eps(orbit, eps_list);
  const int Q = disc.quadrature();
  const auto h0 = equivariant_density(orbit, 0.0, fiber, disc, dopt);
  const int K = static_cast<int>(eps_list.size());
  std::vector<double> errors(eps_list.size());
  std::vector<char> ok(eps_list.size());
  parallel_for(K, threads, [&](int k) {
    const double e = eps_list[static_cast<std::size_t>(k)];
    const auto he = equivariant_density(orbit, e, fiber, disc, dopt);
    ok[static_cast<std::size_t>(k)] = he.converged;
    errors[static_cast<std::size_t>(k)] = sobolev_norm((he.h - h0.h) * (1.0 / e) - response.h_hat, 1, Q, L1Rule::Exact);
  });
  bool converged = h0.converged;
  for (char c : ok) converged = converged && c;
  ResponseValidation v;
  v.fit = fit_rate(eps_list, std::move(errors));
  if (!converged) {
    v.fit.refused = true;
    v.fit.reason = "density did not converge";
  }
  if (phi) {
    const auto p = phi->resized(disc.M);
    const double e = std::abs(eps_list.back());
    const auto hp = equivariant_density(orbit, e, fiber, disc, dopt);
    const auto hm = equivariant_density(orbit, -e, fiber, disc, dopt);
    v.observable_fd = (p.inner(hp.h) - p.inner(hm.h)) / (2.0 * e);
    v.observable_series = p.inner(response.h_hat);
    v.has_observable = true;
  }
  return v;
}

RateFit taylor_check(const ParamCircleMap& map, const FourierFunction& phi, const std::vector<double>& eps_list,
                     const Discretization& disc) {
  check_eps_list(eps_list, "taylor_check");
  const int M = disc.M;
  const int Q = disc.quadrature();
  const auto f = phi.resized(M);
  const auto L0f = apply(assemble(map, 0.0, M, Q), f);
  const auto hat = derivative_operator(map, f, Q);
  std::vector<double> errors;
  for (double e : eps_list) {
    if (std::abs(e) > map.eps_max()) throw DomainError("taylor_check: eps beyond the admissible range");
    const auto Lef = apply(assemble(map, e, M, Q), f);
    errors.push_back(sobolev_norm((Lef - L0f) * (1.0 / e) - hat, 1, Q, L1Rule::Exact));
  }
  return fit_rate(eps_list, std::move(errors));
}

RateFit perturbation_norms(const ParamCircleMap& map, const std::vector<double>& eps_list, int ell, int trials,
                           const Discretization& disc, std::uint64_t seed) {
  check_eps_list(eps_list, "perturbation_norms");
  if (trials < 1) throw DomainError("perturbation_norms: trials must be positive");
  const int M = disc.M;
  const int Q = disc.quadrature();
  const auto A0 = assemble(map, 0.0, M, Q);
  Rng rng(seed);
  std::vector<FourierFunction> tests;
  for (int k = 1; k <= M; ++k) {
    tests.push_back(FourierFunction::cosine(M, k));
    tests.push_back(FourierFunction::sine(M, k));
  }
  for (int t = 0; t < trials; ++t) tests.push_back(random_function(M, rng, 1.0 + (t % 3), false));
  for (auto& f : tests) f *= 1.0 / sobolev_norm(f, ell + 1, Q, L1Rule::Exact);
  std::vector<double> errors;
  for (double e : eps_list) {
    if (std::abs(e) > map.eps_max()) throw DomainError("perturbation_norms: eps beyond the admissible range");
    const auto Ae = assemble(map, e, M, Q);
    double worst = 0.0;
    for (const auto& f : tests) {
      worst = std::max(worst, sobolev_norm(apply(Ae, f) - apply(A0, f), ell, Q, L1Rule::Exact));
    }
    errors.push_back(worst);
  }
  return fit_rate(eps_list, std::move(errors));
}

}  // namespace qresp
