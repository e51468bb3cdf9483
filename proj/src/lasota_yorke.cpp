#include "qresp/lasota_yorke.hpp"

#include <cmath>
#include <map>

#include "qresp/error.hpp"
#include "qresp/rng.hpp"
#include "qresp/transfer.hpp"

namespace qresp {

double verify_crim_identity(const ParamCircleMap& map, double eps, int ell, GVariant variant,
                            const FourierFunction& f, int Q) {
  if (ell + 1 > map.smoothness()) throw DomainError("verify_crim_identity: ell + 1 exceeds smoothness");
  const int M = f.modes();
  if (Q <= 0) Q = default_quadrature(M);
  const auto A = assemble(map, eps, M, Q);
  const auto lhs = derivative(apply(A, f), ell);

  const auto G = g_polynomials(ell, variant, map.smoothness());
  std::vector<std::vector<double>> fj;
  for (int j = 0; j <= ell; ++j) fj.push_back(f.sample(Q, j));
  std::vector<double> bracket(static_cast<std::size_t>(Q));
  std::vector<double> xs(static_cast<std::size_t>(ell + 1));
  for (int q = 0; q < Q; ++q) {
    const double x = static_cast<double>(q) / Q;
    for (int i = 0; i <= ell; ++i) xs[static_cast<std::size_t>(i)] = map.dx(eps, x, i + 1);
    double s = 0.0;
    for (int j = 0; j <= ell; ++j) {
      s += G[static_cast<std::size_t>(j)].evaluate(xs) * fj[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)];
    }
    bracket[static_cast<std::size_t>(q)] = s / std::pow(xs[0], 2 * ell);
  }
  const auto rhs = transfer_samples(map, eps, bracket, M);
  return l1_norm(lhs - rhs, Q, L1Rule::Exact);
}

VariantSelection select_variant(const ParamCircleMap& map, double eps, int ell, const FourierFunction& f,
                                int Q, double tol) {
  VariantSelection s;
  s.residual_paper = verify_crim_identity(map, eps, ell, GVariant::Paper, f, Q);
  s.residual_corrected = verify_crim_identity(map, eps, ell, GVariant::Corrected, f, Q);
  if (s.residual_corrected <= tol) {
    s.variant = GVariant::Corrected;
    s.resolved = true;
  } else if (s.residual_paper <= tol) {
    s.variant = GVariant::Paper;
    s.resolved = true;
  } else {
    s.variant = s.residual_paper < s.residual_corrected ? GVariant::Paper : GVariant::Corrected;
  }
  return s;
}

namespace {

double majorant_max(const std::vector<FormalPolynomial>& G, int upto, double K) {
  double best = 0.0;
  for (int j = 0; j <= upto; ++j) {
    const auto& g = G[static_cast<std::size_t>(j)];
    std::vector<double> xs(static_cast<std::size_t>(std::max(1, g.max_variable())), K);
    best = std::max(best, g.abs_coeffs().evaluate(xs));
  }
  return best;
}

}  // namespace

double symbolic_C(int ell, double lambda, double K, GVariant variant, int smoothness) {
  double C = 0.0;
  for (int i = 0; i <= ell; ++i) {
    const auto G = g_polynomials(i, variant, smoothness);
    C += std::pow(lambda, -2.0 * i) * majorant_max(G, i, K);
  }
  return C;
}

double symbolic_B(int ell, double lambda, double K, GVariant variant, int smoothness) {
  if (ell == 0) return 0.0;
  const auto G = g_polynomials(ell, variant, smoothness);
  return std::pow(lambda, -2.0 * ell) * majorant_max(G, ell - 1, K) +
         symbolic_C(ell - 1, lambda, K, variant, smoothness);
}

bool LYReport::all_hold() const {
  for (const auto& f : fibers) {
    if (!f.holds) return false;
  }
  return !fibers.empty();
}

LYReport ly_constants(const DrivingOrbit& orbit, double eps, int ell, const LYOptions& opt) {
  if (opt.trials < 1) throw DomainError("ly_constants: trials must be positive");
  LYReport rep;
  rep.ell = ell;
  rep.variant = opt.variant;
  const int M = opt.M;
  const int Q = opt.Q > 0 ? opt.Q : default_quadrature(M);

  // Test set shared across fibers: constant, real mode basis, random functions.
  std::vector<FourierFunction> tests{FourierFunction::constant(M, 1.0)};
  for (int k = 1; k <= M; ++k) {
    tests.push_back(FourierFunction::cosine(M, k));
    tests.push_back(FourierFunction::sine(M, k));
  }
  Rng rng(opt.seed);
  for (int t = 0; t < opt.trials; ++t) {
    tests.push_back(random_function(M, rng, 0.5 + 2.0 * (t % 4) / 3.0, false));
  }
  struct Norms {
    double full, lower, top;
  };
  std::vector<Norms> test_norms;
  for (const auto& f : tests) {
    test_norms.push_back({sobolev_norm(f, ell, Q, L1Rule::Exact),
                          ell > 0 ? sobolev_norm(f, ell - 1, Q, L1Rule::Exact) : 0.0,
                          sobolev_seminorm(f, ell, Q, L1Rule::Exact)});
  }

  std::map<std::uint64_t, LYFiber> memo;
  for (int n = -orbit.window(); n <= orbit.window(); ++n) {
    const auto& map = orbit.fiber(n);
    if (ell + 1 > map.smoothness()) throw DomainError("ly_constants: ell + 1 exceeds smoothness");
    auto it = memo.find(map.uid());
    if (it == memo.end()) {
      LYFiber r;
      r.lambda = map.min_abs_dx(eps, opt.grid);
      if (!(r.lambda > 1e-8)) throw DegenerateMapError("ly_constants: min|T'| vanishes on fiber " + std::to_string(n));
      r.K = map.derivative_bound(eps, ell + 1, opt.grid);
      r.C = symbolic_C(ell, r.lambda, r.K, opt.variant, map.smoothness());
      r.B = symbolic_B(ell, r.lambda, r.K, opt.variant, map.smoothness());
      r.contraction = std::pow(r.lambda, -ell);
      const auto A = default_cache().get(map, eps, M, Q);
      for (std::size_t i = 0; i < tests.size(); ++i) {
        const auto Lf = apply(*A, tests[i]);
        const double full = sobolev_norm(Lf, ell, Q, L1Rule::Exact);
        const auto& tn = test_norms[i];
        if (tn.full > 1e-14) r.empirical_C = std::max(r.empirical_C, full / tn.full);
        if (ell > 0 && tn.lower > 1e-14) {
          r.empirical_B = std::max(r.empirical_B, (full - r.contraction * tn.full) / tn.lower);
        }
        if (tn.top > 1e-14 && std::abs(tests[i].mean()) < 1e-300) {
          r.empirical_contraction =
              std::max(r.empirical_contraction, sobolev_seminorm(Lf, ell, Q, L1Rule::Exact) / tn.top);
        }
      }
      r.empirical_B = std::max(0.0, r.empirical_B);
      constexpr double slack = 1e-9;
      r.holds = r.empirical_C <= r.C * (1 + slack) && r.empirical_B <= r.B * (1 + slack) + slack;
      it = memo.emplace(map.uid(), r).first;
    }
    LYFiber r = it->second;
    r.fiber = n;
    rep.fibers.push_back(r);
  }
  return rep;
}

}  // namespace qresp
