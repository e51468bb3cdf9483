#pragma once

#include <vector>

#include "qresp/fourier.hpp"
#include "qresp/maps.hpp"
#include "qresp/polynomial.hpp"

namespace qresp {

/**
 * ||(L f)^{(ell)} - L(T'^{-2 ell} sum_j G_{ell,j}(T', ..., T^{(ell+1)}) f^{(j)})||_1.
 *
 * The left side differentiates the Galerkin image spectrally; the bracket is
 * evaluated pointwise on the Q-grid and pushed through the Koopman quadrature.
 */
double verify_crim_identity(const ParamCircleMap& map, double eps, int ell, GVariant variant,
                            const FourierFunction& f, int Q = 0);

struct VariantSelection {
  GVariant variant = GVariant::Corrected;
  double residual_paper = 0.0;
  double residual_corrected = 0.0;
  /// true when at least one variant met the tolerance
  bool resolved = false;
};

/// Runs the identity for both recursions and keeps the one within tol.
/// When both pass (affine maps) the corrected one is reported.
VariantSelection select_variant(const ParamCircleMap& map, double eps, int ell, const FourierFunction& f,
                                int Q = 0, double tol = 1e-7);

struct LYFiber {
  int fiber = 0;
  double lambda = 0.0;  ///< min |T'|
  double K = 0.0;       ///< grid max of |T^{(i)}|, i <= ell+1
  double C = 0.0;
  double B = 0.0;
  double contraction = 0.0;  ///< lambda^{-ell}
  double empirical_C = 0.0;
  double empirical_B = 0.0;
  double empirical_contraction = 0.0;
  bool holds = false;
};

struct LYReport {
  int ell = 0;
  GVariant variant = GVariant::Corrected;
  std::vector<LYFiber> fibers;  ///< one per window fiber, n = -N..N
  bool all_hold() const;
};

struct LYOptions {
  int trials = 100;
  int M = 32;
  int Q = 0;
  std::uint64_t seed = 7;
  GVariant variant = GVariant::Corrected;
  int grid = 2048;
};

/// Symbolic constants C_ell, B_ell from the G-majorants at K, and their
/// empirical counterparts over the mode basis plus `trials` random functions.
LYReport ly_constants(const DrivingOrbit& orbit, double eps, int ell, const LYOptions& opt = {});

/// C_ell(lambda, K) = sum_{i<=ell} lambda^{-2i} max_{j<=i} G~_{i,j}(K, ..., K).
double symbolic_C(int ell, double lambda, double K, GVariant variant, int smoothness);
/// B_ell = lambda^{-2 ell} max_{j<ell} G~_{ell,j}(K, ..., K) + C_{ell-1}; zero for ell = 0.
double symbolic_B(int ell, double lambda, double K, GVariant variant, int smoothness);

}  // namespace qresp
