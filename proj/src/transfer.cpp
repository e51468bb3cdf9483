#include "qresp/transfer.hpp"

#include <bit>
#include <cmath>

#include "qresp/error.hpp"
#include "qresp/rng.hpp"

namespace qresp {

namespace {

/// k q / Q reduced to [-1/2, 1/2] in exact integer arithmetic.
double grid_phase(long long k, long long q, long long Q) {
  long long r = (k * q) % Q;
  if (2 * r > Q) r -= Q;
  if (2 * r < -Q) r += Q;
  return static_cast<double>(r) / static_cast<double>(Q);
}

/// k T(x_q) mod 1 with T(x) = d x + p(x): the d x part is reduced exactly.
double image_phase(long long k, long long q, long long Q, int d, double p) {
  return std::remainder(grid_phase(k * d, q, Q) + std::remainder(static_cast<double>(k) * p, 1.0), 1.0);
}

}  // namespace

TransferMatrix TransferMatrix::identity(int M) {
  TransferMatrix t;
  t.M = M;
  t.A = Eigen::MatrixXcd::Identity(2 * M + 1, 2 * M + 1);
  t.provenance.factors = 0;
  t.identity_like = true;
  return t;
}

TransferMatrix assemble(const ParamCircleMap& map, double eps, int M, int Q) {
  if (M < 0) throw DomainError("assemble: M must be nonnegative");
  if (Q <= 0) Q = default_quadrature(M);
  if (Q < 4 * M + 4) {
    throw AliasingError("assemble: quadrature Q = " + std::to_string(Q) + " < 4M+4 = " +
                        std::to_string(4 * M + 4));
  }
  const int n = 2 * M + 1;
  Eigen::MatrixXcd Ex(Q, n), Et(Q, n);
  for (int q = 0; q < Q; ++q) {
    const double x = static_cast<double>(q) / Q;
    const double p = map.periodic_part(eps, x);
    for (int k = -M; k <= M; ++k) {
      Ex(q, k + M) = std::polar(1.0, kTwoPi * grid_phase(k, q, Q));
      Et(q, k + M) = std::polar(1.0, kTwoPi * image_phase(k, q, Q, map.degree(), p));
    }
  }
  TransferMatrix out;
  out.M = M;
  out.A = (Et.adjoint() * Ex) / static_cast<double>(Q);
  out.provenance = {map.name(), map.uid(), eps, 0, 1, Q};
  out.non_expanding = map.min_abs_dx(eps, 256) <= 1.0;
  out.identity_like = (out.A - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-14;
  return out;
}

FourierFunction apply(const TransferMatrix& A, const FourierFunction& f) {
  if (f.modes() != A.M) {
    throw DomainError("apply: function has " + std::to_string(f.modes()) + " modes, matrix has " +
                      std::to_string(A.M));
  }
  if (A.identity_like) return f;
  Eigen::Map<const Eigen::VectorXcd> v(f.coeffs().data(), A.size());
  Eigen::VectorXcd w = A.A * v;
  return FourierFunction::symmetrized(A.M, std::vector<cplx>(w.data(), w.data() + w.size()));
}

FourierFunction transfer_samples(const ParamCircleMap& map, double eps, std::span<const double> samples,
                                 int M) {
  const int Q = static_cast<int>(samples.size());
  if (Q < 4 * M + 4) throw AliasingError("transfer_samples: need at least 4M+4 samples");
  std::vector<cplx> c(static_cast<std::size_t>(2 * M + 1));
  for (int q = 0; q < Q; ++q) {
    const double p = map.periodic_part(eps, static_cast<double>(q) / Q);
    const double g = samples[static_cast<std::size_t>(q)];
    for (int k = -M; k <= M; ++k) {
      c[static_cast<std::size_t>(k + M)] += g * std::polar(1.0, -kTwoPi * image_phase(k, q, Q, map.degree(), p));
    }
  }
  for (auto& v : c) v /= static_cast<double>(Q);
  return FourierFunction::symmetrized(M, std::move(c));
}

TransferMatrix then(const TransferMatrix& A, const TransferMatrix& B) {
  if (A.M != B.M) throw DomainError("then: mode mismatch");
  TransferMatrix out;
  out.M = A.M;
  out.A = B.A * A.A;
  out.identity_like = A.identity_like && B.identity_like;
  out.provenance = A.provenance;
  out.provenance.factors = A.provenance.factors + B.provenance.factors;
  return out;
}

std::shared_ptr<const TransferMatrix> TransferCache::get(const ParamCircleMap& map, double eps, int M, int Q) {
  if (Q <= 0) Q = default_quadrature(M);
  const Key key{map.uid(), std::bit_cast<std::uint64_t>(map.eps_dependent() ? eps : 0.0), M, Q};
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  auto built = std::make_shared<const TransferMatrix>(assemble(map, eps, M, Q));
  std::lock_guard lock(mu_);
  return entries_.emplace(key, std::move(built)).first->second;
}

std::size_t TransferCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void TransferCache::clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
}

TransferCache& default_cache() {
  static TransferCache cache;
  return cache;
}

TransferMatrix compose_forward(const DrivingOrbit& orbit, double eps, int n, int start, int M, int Q,
                               TransferCache* cache) {
  if (n < 0) throw DomainError("compose_forward: n must be nonnegative");
  if (n > 0 && (!orbit.contains(start) || !orbit.contains(start + n - 1))) {
    throw WindowError("compose_forward: fibers " + std::to_string(start) + ".." +
                      std::to_string(start + n - 1) + " leave the window of size " +
                      std::to_string(orbit.window()));
  }
  if (!cache) cache = &default_cache();
  TransferMatrix out = TransferMatrix::identity(M);
  out.provenance.first_fiber = start;
  out.provenance.eps = eps;
  for (int i = 0; i < n; ++i) {
    auto Ai = cache->get(orbit.fiber(start + i), eps, M, Q);
    if (Ai->identity_like) continue;
    out.A = out.identity_like ? Ai->A : Eigen::MatrixXcd(Ai->A * out.A);
    out.identity_like = false;
    out.provenance.Q = Ai->provenance.Q;
  }
  out.provenance.factors = n;
  if (n == 1) out.provenance.map_name = orbit.fiber(start).name();
  return out;
}

FourierFunction random_function(int M, Rng& rng, double decay, bool mean_zero) {
  std::vector<cplx> c(static_cast<std::size_t>(2 * M + 1));
  c[static_cast<std::size_t>(M)] = mean_zero ? 0.0 : standard_normal(rng);
  for (int k = 1; k <= M; ++k) {
    const double s = 1.0 / std::pow(1.0 + k, decay);
    const cplx z{s * standard_normal(rng), s * standard_normal(rng)};
    c[static_cast<std::size_t>(M + k)] = z;
    c[static_cast<std::size_t>(M - k)] = std::conj(z);
  }
  return FourierFunction(M, std::move(c));
}

namespace {

double norm_of(const FourierFunction& f, int ell, NormKind kind, int Q, L1Rule rule) {
  return kind == NormKind::Full ? sobolev_norm(f, ell, Q, rule) : sobolev_seminorm(f, ell, Q, rule);
}

}  // namespace

double operator_norm_estimate(const TransferMatrix& A, int ell, const NormEstimateOptions& opt) {
  if (opt.trials < 16) throw DomainError("operator_norm_estimate: trials must be >= 16");
  if (ell < 0) throw DomainError("operator_norm_estimate: ell must be nonnegative");
  const int M = A.M;
  double best = 0.0;
  auto consider = [&](const FourierFunction& f) {
    const double den = norm_of(f, ell, opt.kind, opt.Q, opt.rule);
    if (den <= 1e-14) return;
    best = std::max(best, norm_of(apply(A, f), ell, opt.kind, opt.Q, opt.rule) / den);
  };
  if (!opt.mean_zero) consider(FourierFunction::constant(M, 1.0));
  for (int k = 1; k <= M; ++k) {
    consider(FourierFunction::cosine(M, k));
    consider(FourierFunction::sine(M, k));
  }
  Rng rng(opt.seed);
  for (int t = 0; t < opt.trials; ++t) {
    consider(random_function(M, rng, 0.5 + 2.0 * (t % 4) / 3.0, opt.mean_zero));
  }
  return best;
}

}  // namespace qresp
