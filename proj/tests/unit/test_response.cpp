#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "qresp/error.hpp"
#include "qresp/response.hpp"

using namespace qresp;
using nlohmann::json;

namespace {

FourierFunction cos1(int M) { return FourierFunction::cosine(M, 1); }

MapPtr composed_cos(int M = 32) { return doubling_composed(2, cos1(M), 0.5); }

MapPtr additive_pert() {
  return builtin_family("additive", json{{"degree", 2}, {"base", json::array({{{"amp", 0.05}, {"freq", 1}}})},
                                         {"perturbation", json::array({{{"amp", 0.5}, {"freq", 1}, {"phase", 0.7}}})},
                                         {"eps_max", 0.125}});
}

DrivingOrbit random_orbit(std::uint64_t seed) {
  auto reg = std::make_shared<MapRegistry>();
  reg->add("A", additive_pert());
  reg->add("B", builtin_family("additive", json{{"degree", 3}, {"shift", 0.2},
                                                {"base", json::array({{{"amp", 0.08}, {"freq", 2}}})},
                                                {"perturbation", json::array({{{"amp", 0.3}, {"freq", 1}}})},
                                                {"eps_max", 0.125}}));
  return sample_orbit("iid", seed, 64, json{{"symbols", {"A", "B"}}, {"p", {0.5, 0.5}}}, reg);
}

}  // namespace

TEST_CASE("derivative operator of the composed doubling map sends 1 to psi") {
  const auto map = composed_cos();
  const auto g = derivative_operator(*map, FourierFunction::constant(32, 1.0));
  CHECK((g - cos1(32)).max_abs_coeff() <= 1e-12);
  CHECK(std::abs(g.mean()) < 1e-15);
}

TEST_CASE("derivative operator agrees with -(S L f)'") {
  const int M = 32;
  const std::vector<TrigTerm> pt{{0.6, 1, 0.4}, {0.3, 2, 1.3}};
  const auto psi = FourierFunction::from_terms(M, pt);
  const auto map = doubling_composed(2, psi, 0.3);
  const auto S = -1.0 * psi.antiderivative();
  const auto A0 = assemble(*map, 0.0, M);
  Rng rng(12);
  for (int t = 0; t < 5; ++t) {
    const auto f = random_function(M, rng, 2.0).with_mean(1.0);
    const auto a = derivative_operator(*map, f);
    const auto b = composed_derivative_operator(A0, S, f);
    CHECK(sobolev_norm(a - b, 1, 0, L1Rule::Exact) <= 1e-8);
  }
}

TEST_CASE("unperturbed families have zero derivative operator and response") {
  const auto map = builtin_family("additive", json{{"base", json::array({{{"amp", 0.05}, {"freq", 1}}})}});
  const auto g = derivative_operator(*map, FourierFunction::cosine(16, 2).with_mean(1.0));
  CHECK(g.max_abs_coeff() < 1e-15);
  const auto orbit = DrivingOrbit::constant(map, 64);
  const auto r = response_series(orbit, 0, {16});
  CHECK(r.h_hat.max_abs_coeff() < 1e-15);
  const auto v = response_validation(orbit, 0, {0.08, 0.04, 0.02}, r, {16});
  for (double e : v.fit.errors) CHECK(e < 1e-12);
}

TEST_CASE("deterministic doubling with psi = cos gives h_hat = cos") {
  const auto orbit = DrivingOrbit::constant(composed_cos(), 64);
  const auto r = response_series(orbit, 0, {32});
  CHECK(sobolev_norm(r.h_hat - cos1(32), 1, 0, L1Rule::Exact) <= 1e-8);
  CHECK(std::abs(r.h_hat.mean()) <= 1e-9);
  CHECK(r.densities_converged);
}

TEST_CASE("series depth N and N + 5 differ by at most the tail estimate") {
  const auto orbit = random_orbit(5);
  ResponseOptions a, b;
  a.N = 8;
  b.N = 13;
  a.density.tol = b.density.tol = 1e-12;
  const auto ra = response_series(orbit, 0, {32}, a);
  const auto rb = response_series(orbit, 0, {32}, b);
  CHECK(ra.series_depth == 8);
  CHECK(std::isfinite(ra.tail_estimate));
  CHECK(sobolev_norm(ra.h_hat - rb.h_hat, 1, 0, L1Rule::Exact) <= ra.tail_estimate);
  CHECK(std::abs(rb.h_hat.mean()) <= 1e-9);
}

TEST_CASE("Koopman and density forms of the observable response agree") {
  const auto orbit = random_orbit(9);
  const std::vector<TrigTerm> t{{1.0, 1, std::numbers::pi / 2}, {0.5, 2, 0.0}};
  ResponseOptions o;
  o.observable = FourierFunction::from_terms(32, t);
  o.density.tol = 1e-12;
  const auto r = response_series(orbit, 1, {32}, o);
  REQUIRE(r.has_observable);
  const auto k = koopman_observable_response(orbit, r, *o.observable);
  CHECK(k.resolved);
  CHECK(std::abs(k.value - r.observable_response) <= 1e-8);
  CHECK(k.terms.size() == r.sources.size());
}

TEST_CASE("stability of linear maps is exact and short windows are refused") {
  const auto lin = DrivingOrbit::constant(builtin_family("linear_eps2", json{{"beta", 2}}), 32);
  const auto fit = stability_rate(lin, 0, {0.125, 0.0625, 0.03125}, 1, {16});
  CHECK(fit.exact);
  const auto short_orbit = DrivingOrbit::constant(additive_pert(), 2);
  DensityOptions o;
  o.tol = 1e-13;
  CHECK(stability_rate(short_orbit, 0, {0.125, 0.0625, 0.03125}, 1, {16}, o).refused);
}

TEST_CASE("operator Taylor check at first order") {
  const auto map = additive_pert();
  const auto phi = FourierFunction::cosine(32, 1).with_mean(1.0);
  const auto fit = taylor_check(*map, phi, dyadic_eps_grid(1.0), {32});
  CHECK(fit.fitted_exponent >= 0.9);
  CHECK(fit.r_squared >= 0.98);
}

TEST_CASE("perturbation norms scale linearly or quadratically") {
  const auto eps = dyadic_eps_grid(0.125, 0, 6);
  const auto add = perturbation_norms(*additive_pert(), eps, 1, 16, {16});
  CHECK(add.fitted_exponent >= 0.9);
  CHECK(add.fitted_exponent <= 1.1);
  const auto eps2 = builtin_family("linear_eps2", json{{"beta", 2}, {"D", json::array({{{"amp", 0.1}, {"freq", 1}}})}});
  const auto q = perturbation_norms(*eps2, dyadic_eps_grid(0.5, 0, 6), 0, 16, {16});
  CHECK(q.fitted_exponent >= 1.8);
  CHECK(std::isfinite(q.fitted_prefactor));
  const auto m = additive_pert();
  const auto f = FourierFunction::cosine(16, 3).with_mean(1.0);
  CHECK((apply(assemble(*m, 0.0, 16), f) - apply(assemble(*m, 0.0, 16), f)).max_abs_coeff() == 0.0);
}

TEST_CASE("rate fits") {
  const auto g = dyadic_eps_grid(1.0);
  REQUIRE(g.size() == 8);
  CHECK(g.front() == 0.125);
  CHECK(g.back() == std::ldexp(1.0, -10));
  std::vector<double> err;
  for (double e : g) err.push_back(3.0 * e * e);
  const auto f = fit_rate(g, err);
  CHECK(f.fitted_exponent == doctest::Approx(2.0));
  CHECK(f.fitted_prefactor == doctest::Approx(3.0));
  CHECK(f.monotone);
  const auto z = fit_rate(g, std::vector<double>(g.size(), 0.0));
  CHECK(z.exact);
}
