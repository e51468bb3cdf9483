#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "qresp/fourier.hpp"
#include "qresp/maps.hpp"
#include "qresp/rng.hpp"

namespace qresp {

struct TransferProvenance {
  std::string map_name;
  std::uint64_t map_uid = 0;
  double eps = 0.0;
  int first_fiber = 0;  ///< fiber index of the first factor
  int factors = 1;      ///< number of composed fibers (0 = identity)
  int Q = 0;
};

/**
 * Galerkin matrix of a transfer operator on the modes |k| <= M,
 * A(k + M, j + M) = <L e_j, e_k>.
 */
struct TransferMatrix {
  int M = 0;
  Eigen::MatrixXcd A;
  TransferProvenance provenance;
  /// min |T'| <= 1 for a single assembled fiber; informational only.
  bool non_expanding = false;
  /// Entries within 1e-14 of the identity (identity fibers); apply() skips the product.
  bool identity_like = false;

  int size() const noexcept { return 2 * M + 1; }
  static TransferMatrix identity(int M);
};

/// Koopman quadrature A[k,j] = (1/Q) sum_q e^{2 pi i j x_q} e^{-2 pi i k T(eps, x_q)}.
/// Requires Q >= 4M+4; Q <= 0 selects default_quadrature(M).
TransferMatrix assemble(const ParamCircleMap& map, double eps, int M, int Q = 0);

/// A f, Hermitian-symmetrized. Throws DomainError when f.modes() != A.M.
FourierFunction apply(const TransferMatrix& A, const FourierFunction& f);

/// Koopman quadrature of L g for g given by samples on the uniform grid:
/// coefficient k is (1/Q) sum_q g(x_q) e^{-2 pi i k T(eps, x_q)}, Q = samples.size().
FourierFunction transfer_samples(const ParamCircleMap& map, double eps, std::span<const double> samples, int M);

/// B A, the operator "first A then B".
TransferMatrix then(const TransferMatrix& A, const TransferMatrix& B);

/// Thread-safe memo of assembled fibers keyed by (map uid, eps bits, M, Q).
class TransferCache {
 public:
  std::shared_ptr<const TransferMatrix> get(const ParamCircleMap& map, double eps, int M, int Q);
  std::size_t size() const;
  void clear();

 private:
  using Key = std::tuple<std::uint64_t, std::uint64_t, int, int>;
  mutable std::mutex mu_;
  std::map<Key, std::shared_ptr<const TransferMatrix>> entries_;
};

/// Process-wide default cache.
TransferCache& default_cache();

/// A_{start+n-1} ... A_{start}. Throws WindowError if a factor leaves the window.
TransferMatrix compose_forward(const DrivingOrbit& orbit, double eps, int n, int start, int M, int Q = 0,
                               TransferCache* cache = nullptr);

enum class NormKind {
  Full,           ///< W^{ell,1} norm, sum_{j<=ell} ||f^{(j)}||_1
  TopSeminorm,    ///< ||f^{(ell)}||_1
};

struct NormEstimateOptions {
  int trials = 64;
  NormKind kind = NormKind::Full;
  bool mean_zero = false;
  std::uint64_t seed = 1;
  L1Rule rule = L1Rule::Exact;
  int Q = 0;
};

/// Max of ||A f|| / ||f|| over the real mode basis and `trials` random f; a
/// lower bound for the operator norm. Requires trials >= 16.
double operator_norm_estimate(const TransferMatrix& A, int ell, const NormEstimateOptions& opt = {});

/// Random real trigonometric polynomial with coefficients decaying like 1/(1+|k|)^decay.
FourierFunction random_function(int M, Rng& rng, double decay = 1.0, bool mean_zero = false);

}  // namespace qresp
