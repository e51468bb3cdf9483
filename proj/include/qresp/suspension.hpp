#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qresp/fourier.hpp"

namespace qresp {

/// A point (omega, i) of the suspension: roof omega0 = h(omega), height i.
struct SuspensionState {
  std::uint64_t omega0 = 1;
  std::uint64_t i = 0;
  /// Seed of the lazily realized future symbol stream.
  std::uint64_t stream = 0;
  /// omega0 reached the sampling cap.
  bool capped = false;

  std::uint64_t covering_time() const { return omega0 - i; }
};

/// The symbol law P(n) = n^{-(2+delta)} / zeta(2+delta) and its size-biased
/// version n^{-(1+delta)} / zeta(1+delta), sampled by inverse CDF.
class RoofLaw {
 public:
  static constexpr std::uint64_t kCap = std::uint64_t{1} << 62;

  /// size_biased selects the stationary (suspension) law.
  RoofLaw(double delta, bool size_biased, int table = 1 << 16);
  double exponent() const noexcept { return s_; }
  double normalization() const noexcept { return norm_; }
  /// P(X >= n).
  double survival(std::uint64_t n) const;
  /// Smallest n with P(X <= n) >= u; kCap when beyond the cap.
  std::uint64_t quantile(double u) const;

 private:
  double delta_;
  double s_;
  double norm_;
  std::vector<double> cdf_;  ///< cdf_[k] = P(X <= k+1)
};

/// Independent draws from the suspension measure. Draw j uses substream
/// derive_seed(seed, j / 4096), so results do not depend on thread count.
std::vector<SuspensionState> sample_suspension(std::uint64_t seed, double delta, std::size_t count, int threads = 1);

/// Exact law of n_c under the suspension measure.
double prob_covering_equals(double delta, std::uint64_t N);
double prob_covering_at_least(double delta, std::uint64_t m);
/// E min(n_c, N) = sum_{m=1}^{N} P(n_c >= m).
double exact_truncated_mean(double delta, std::uint64_t N);

enum class PsiProfile {
  /// exp(-1/(1-t^2)) bump on I, de-meaned
  Bump,
  /// b(x) - b(x + 1/2) for the bump b; only odd modes
  Antiperiodic,
};

struct PsiObservable {
  double a = 0.0, b = 0.0;  ///< I = [a, b]
  PsiProfile profile = PsiProfile::Bump;
  FourierFunction psi;
  double mean = 0.0;
  double l2 = 0.0;
  /// int of |psi| outside the support arcs of the profile
  double mass_outside = 0.0;
  /// int psi (psi o 2x) dm
  double corr_doubling = 0.0;
};

/// Requires 0 < a < b < 1 and I disjoint from I/2 and from I/2 + 1/2.
PsiObservable make_psi(double a, double b, int M, PsiProfile profile = PsiProfile::Antiperiodic);

enum class ResponseRoute { ClosedForm, Operator };

struct QuenchedValue {
  double value = 0.0;
  int terms = 0;
  bool truncated = false;
};

/**
 * int psi h_hat at the state. The closed form is n_c = omega0 - i. The operator
 * route realizes the forward fibers (omega0 - 1 - i identities, one doubling,
 * then fresh symbols), forms Lhat 1 from the D_eps-composed doubling map and
 * sums <L^n Lhat 1, psi> for n < N; N <= 0 selects n_c + 5.
 */
QuenchedValue quenched_response_value(const SuspensionState& state, ResponseRoute route, const PsiObservable& psi,
                                      double delta, int M, int Q = 0, long long N = 0);

struct DivergenceRow {
  std::string kind;  ///< "samples" or "cap"
  std::size_t sample_size = 0;
  std::uint64_t cap = 0;
  double truncated_mean = 0.0;
  double exact_mean = 0.0;
  double fitted_slope = 0.0;
  std::uint64_t max_sample = 0;
};

struct DivergenceReport {
  std::vector<DivergenceRow> rows;
  double fitted_slope = 0.0;  ///< log-log slope of truncated mean vs cap
  double power_r2 = 0.0;
  double log_r2 = 0.0;        ///< R^2 of truncated mean vs log cap
  bool increasing_in_cap = false;
  std::uint64_t max_sample = 0;
  /// draws whose roof hit RoofLaw::kCap
  std::size_t capped_samples = 0;
};

/// Truncated annealed means over growing sample sizes (at the largest cap)
/// and over the cap grid (at the largest sample size).
DivergenceReport annealed_divergence_experiment(std::uint64_t seed, double delta,
                                                const std::vector<std::size_t>& sample_sizes,
                                                const std::vector<std::uint64_t>& caps, int threads = 1);

}  // namespace qresp
