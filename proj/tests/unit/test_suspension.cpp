#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <map>

#include "qresp/density.hpp"
#include "qresp/error.hpp"
#include "qresp/suspension.hpp"
#include "qresp/zeta.hpp"

using namespace qresp;

namespace {

/// sum_{k >= N} k^{-s} from the Boost zeta.
double tail_sum(double s, long N) {
  double head = 0.0;
  for (long k = 1; k < N; ++k) head += std::pow(static_cast<double>(k), -s);
  return boost::math::zeta(s) - head;
}

/// P(n_c = N): roof k is size-biased, n_c is uniform on {1..k}.
double oracle_prob(double delta, long N) { return tail_sum(2 + delta, N) / boost::math::zeta(1 + delta); }

}  // namespace

TEST_CASE("zeta and Hurwitz tails against Boost") {
  for (double s : {1.5, 2.0, 2.5, 3.0, 4.5}) {
    CHECK(zeta(s) == doctest::Approx(boost::math::zeta(s)).epsilon(1e-14));
    for (long N : {1L, 2L, 7L, 40L}) CHECK(hurwitz_tail(s, static_cast<double>(N)) == doctest::Approx(tail_sum(s, N)).epsilon(1e-12));
  }
}

TEST_CASE("exact covering-time law") {
  for (double delta : {0.5, 1.0}) {
    double total = 0.0;
    for (long N = 1; N <= 50; ++N) {
      const double p = prob_covering_equals(delta, static_cast<std::uint64_t>(N));
      CHECK(p == doctest::Approx(oracle_prob(delta, N)).epsilon(1e-11));
      total += p;
    }
    CHECK(prob_covering_at_least(delta, 51) == doctest::Approx(1.0 - total).epsilon(1e-10));
    // E min(n_c, N) = sum_{m <= N} P(n_c >= m)
    double m = 0.0, surv = 1.0;
    for (long k = 1; k <= 20; ++k) {
      m += surv;
      surv -= oracle_prob(delta, k);
    }
    CHECK(exact_truncated_mean(delta, 20) == doctest::Approx(m).epsilon(1e-11));
  }
  CHECK_THROWS_AS(prob_covering_equals(0.0, 3), DomainError);
}

TEST_CASE("roof laws") {
  const RoofLaw sym(0.5, false);
  CHECK(sym.exponent() == doctest::Approx(2.5));
  CHECK(sym.survival(1) == doctest::Approx(1.0));
  CHECK(sym.survival(3) == doctest::Approx(tail_sum(2.5, 3) / boost::math::zeta(2.5)).epsilon(1e-12));
  CHECK(sym.quantile(0.0) == 1);
  const RoofLaw biased(1.0, true);
  CHECK(biased.survival(2) == doctest::Approx(1.0 - 1.0 / boost::math::zeta(2.0)).epsilon(1e-12));
}

TEST_CASE("suspension samples: size-biased roof, uniform height, reproducible") {
  const std::size_t S = 1000000;
  const auto states = sample_suspension(77, 1.0, S, 4);
  std::size_t ones = 0;
  for (const auto& s : states) {
    REQUIRE(s.i < s.omega0);
    ones += s.omega0 == 1;
  }
  const double p = 1.0 / boost::math::zeta(2.0);
  CHECK(std::abs(static_cast<double>(ones) - p * S) <= 3.0 * std::sqrt(S * p * (1 - p)));

  const auto again = sample_suspension(77, 1.0, 1000, 1);
  for (std::size_t j = 0; j < again.size(); ++j) {
    CHECK(again[j].omega0 == states[j].omega0);
    CHECK(again[j].i == states[j].i);
  }
}

TEST_CASE("height is uniform given the roof (chi-square)") {
  const auto states = sample_suspension(5, 0.5, 100000, 2);
  for (std::uint64_t k : {2u, 3u, 5u}) {
    std::map<std::uint64_t, double> counts;
    double n = 0;
    for (const auto& s : states) {
      if (s.omega0 != k) continue;
      counts[s.i] += 1;
      n += 1;
    }
    REQUIRE(n > 100);
    double chi2 = 0.0;
    for (std::uint64_t i = 0; i < k; ++i) {
      const double e = n / static_cast<double>(k);
      chi2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    const boost::math::chi_squared dist(static_cast<double>(k - 1));
    CAPTURE(k);
    CHECK(chi2 <= boost::math::quantile(dist, 0.999));
  }
}

TEST_CASE("tail law of n_c within three binomial sigma") {
  const std::size_t S = 1000000;
  const double delta = 0.5;
  const auto states = sample_suspension(2024, delta, S, 4);
  std::vector<double> counts(51, 0.0);
  for (const auto& s : states) {
    const auto nc = s.covering_time();
    if (nc <= 50) counts[nc] += 1;
  }
  for (long N = 1; N <= 50; ++N) {
    const double p = oracle_prob(delta, N);
    CAPTURE(N);
    CHECK(std::abs(counts[N] - p * S) <= 3.0 * std::sqrt(S * p * (1 - p)));
  }
}

TEST_CASE("psi observable") {
  const auto psi = make_psi(0.65, 0.75, 64);
  CHECK(std::abs(psi.mean) <= 1e-10);
  CHECK(std::abs(psi.l2 - 1.0) <= 1e-8);
  CHECK(std::abs(psi.psi.mean()) <= 1e-10);
  CHECK(std::abs(psi.psi.l2_norm() - 1.0) <= 1e-8);
  CHECK(std::abs(psi.corr_doubling) <= 1e-6);
  CHECK(psi.mass_outside <= 2e-3);
  // resolving the bump edges to 1e-6 takes more modes
  CHECK(make_psi(0.65, 0.75, 512).mass_outside <= 1e-6);
  const auto bump = make_psi(0.65, 0.75, 512, PsiProfile::Bump);
  CHECK(std::abs(bump.mean) <= 1e-10);
  CHECK(std::abs(bump.l2 - 1.0) <= 1e-8);
  CHECK_THROWS_AS(make_psi(0.2, 0.5, 64), DomainError);
  CHECK_THROWS_AS(make_psi(0.0, 0.1, 64), DomainError);
}

TEST_CASE("quenched response values") {
  const auto psi = make_psi(0.65, 0.75, 64);
  CHECK(quenched_response_value({5, 2}, ResponseRoute::ClosedForm, psi, 0.5, 64).value == 3.0);
  CHECK(quenched_response_value({1, 0}, ResponseRoute::ClosedForm, psi, 0.5, 64).value == 1.0);
  const auto op = quenched_response_value({3, 0, 99}, ResponseRoute::Operator, psi, 0.5, 64);
  CHECK(std::abs(op.value - 3.0) <= 1e-5);
  CHECK_FALSE(op.truncated);
  const auto one = quenched_response_value({1, 0, 4}, ResponseRoute::Operator, psi, 0.5, 64);
  CHECK(std::abs(one.value - 1.0) <= 1e-5);
  CHECK(quenched_response_value({9, 0, 1}, ResponseRoute::Operator, psi, 0.5, 64, 0, 4).truncated);
  CHECK_THROWS_AS(quenched_response_value({2, 2}, ResponseRoute::ClosedForm, psi, 0.5, 64), DomainError);
}

TEST_CASE("Lebesgue is equivariant on the identity/doubling cocycle") {
  const FourierFunction one = FourierFunction::constant(16, 1.0);
  for (const char* fam : {"identity", "doubling"}) {
    const auto orbit = DrivingOrbit::constant(builtin_family(fam), 4);
    DensityResult h;
    h.h = one;
    CHECK(equivariance_residual(orbit, 0.0, 0, h, h, {16}) <= 1e-10);
  }
}

TEST_CASE("annealed divergence") {
  const std::vector<std::uint64_t> caps{16, 64, 256, 1024, 4096, 16384};
  const auto rep = annealed_divergence_experiment(3, 0.5, {10000, 100000}, caps, 2);
  CHECK(rep.increasing_in_cap);
  CHECK(rep.max_sample < RoofLaw::kCap);
  CHECK(std::abs(rep.fitted_slope - 0.5) <= 0.15);

  const auto log_rep = annealed_divergence_experiment(3, 1.0, {1000000}, caps, 2);
  CHECK(log_rep.log_r2 > log_rep.power_r2);
  CHECK_THROWS_AS(annealed_divergence_experiment(3, 0.5, {100, 10}, caps), DomainError);
}
