#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "qresp/fourier.hpp"

namespace qresp {

/**
 * A parameterized circle map T(eps, .) of degree d given by its lift together
 * with closed-form x-, eps- and mixed derivatives.
 *
 * The lift satisfies lift(eps, x + 1) = lift(eps, x) + d. All derivative
 * callables are cross-checked against central finite differences by
 * check_derivatives(), which builtin_family() runs on every map it returns.
 */
class ParamCircleMap {
 public:
  using Fn = std::function<double(double eps, double x)>;
  using OrderFn = std::function<double(double eps, double x, int order)>;

  struct Callables {
    Fn lift;
    OrderFn dx;  ///< order >= 1
    Fn de;
    Fn dee;
    Fn dedx;
    /// lift - degree * x evaluated directly; optional, improves quadrature phases.
    Fn periodic;
  };

  ParamCircleMap(std::string name, int degree, int smoothness, double eps_max, Callables fns,
                 bool eps_dependent = true);

  const std::string& name() const noexcept { return name_; }
  int degree() const noexcept { return degree_; }
  int smoothness() const noexcept { return smoothness_; }
  /// Admissible parameter range is |eps| <= eps_max().
  double eps_max() const noexcept { return eps_max_; }
  /// Process-unique identity, used as a cache key.
  std::uint64_t uid() const noexcept { return uid_; }
  bool eps_dependent() const noexcept { return eps_dependent_; }
  bool has_eps_derivatives() const noexcept {
    return static_cast<bool>(fns_.de) && static_cast<bool>(fns_.dee) && static_cast<bool>(fns_.dedx);
  }

  double lift(double eps, double x) const { return fns_.lift(eps, x); }
  /// lift(eps, x) - degree * x, a 1-periodic function.
  double periodic_part(double eps, double x) const {
    return fns_.periodic ? fns_.periodic(eps, x) : fns_.lift(eps, x) - degree_ * x;
  }
  double dx(double eps, double x, int order = 1) const;
  double de(double eps, double x) const;
  double dee(double eps, double x) const;
  double dedx(double eps, double x) const;

  /// Largest relative discrepancy between analytic derivatives (orders 1..r in x,
  /// first and second in eps, mixed) and central differences at `points`
  /// pseudo-random (eps, x). Throws DomainError above `tol`.
  double check_derivatives(int points = 64, double step = 1e-5, double tol = 1e-6) const;
  /// max over a grid of |lift(eps, x+1) - lift(eps, x) - d|.
  double periodicity_residual(double eps, int grid = 257) const;
  /// min |dT/dx| by grid minimization and golden-section refinement (tol 1e-10).
  double min_abs_dx(double eps, int grid = 1024) const;
  /// max over the grid of max_{1<=i<=order} |d^i T/dx^i|.
  double derivative_bound(double eps, int order, int grid = 1024) const;

 private:
  std::string name_;
  int degree_;
  int smoothness_;
  double eps_max_;
  Callables fns_;
  bool eps_dependent_;
  std::uint64_t uid_;
};

using MapPtr = std::shared_ptr<const ParamCircleMap>;

struct FamilyInfo {
  std::string name;
  std::string description;
};

/// Tags accepted by builtin_family().
std::vector<FamilyInfo> list_families();

/**
 * Builds a built-in family from a parameter table.
 *
 *   identity           T = x
 *   doubling           T = d x                          {degree=2}
 *   linear_eps2        T = (Id + eps^2 D)(beta x)        {beta, D:[terms], eps_max}
 *   additive           T = d x + shift + B(x) + eps P(x) {degree, shift, base:[terms],
 *                                                        perturbation:[terms], eps_max}
 *   doubling_composed  T = D_eps(d x), D_eps(y) = y - eps int_0^y psi
 *                                                       {degree=2, psi:[terms], eps_max}
 *
 * Terms are objects {amp, freq, phase} meaning amp sin(2 pi freq x + phase).
 * Throws DomainError on unknown tags, malformed parameters, or when
 * min |dT/dx| <= 0 somewhere on the admissible eps range.
 */
MapPtr builtin_family(const std::string& name, const nlohmann::json& params = nlohmann::json::object());

/// D_eps composed with d x for an arbitrary mean-zero observable psi.
MapPtr doubling_composed(int degree, const FourierFunction& psi, double eps_max);

/// Checks min |dT/dx| > 0 for eps on a uniform grid of [-eps_max, eps_max].
/// Throws DomainError naming the offending eps.
void check_admissible(const ParamCircleMap& map, double eps_max, int eps_points = 9);

/// Symbol table naming the maps a driving orbit draws from.
class MapRegistry {
 public:
  void add(std::string symbol, MapPtr map);
  int index_of(const std::string& symbol) const;
  const MapPtr& map(int index) const { return maps_.at(static_cast<std::size_t>(index)); }
  const std::string& symbol(int index) const { return symbols_.at(static_cast<std::size_t>(index)); }
  int size() const noexcept { return static_cast<int>(maps_.size()); }

 private:
  std::vector<std::string> symbols_;
  std::vector<MapPtr> maps_;
};

/// A two-sided window (fibers n = -N..N) of a driving orbit.
class DrivingOrbit {
 public:
  DrivingOrbit(std::shared_ptr<const MapRegistry> registry, int window, std::vector<int> symbols,
               std::uint64_t seed = 0, std::string family = "explicit");

  /// Orbit whose every fiber is `map`.
  static DrivingOrbit constant(MapPtr map, int window);

  int window() const noexcept { return window_; }
  bool contains(int n) const noexcept { return n >= -window_ && n <= window_; }
  int symbol(int n) const;
  const ParamCircleMap& fiber(int n) const { return *fiber_ptr(n); }
  const MapPtr& fiber_ptr(int n) const;
  /// The orbit of sigma^k omega: fiber(n) of the result is fiber(n + k) here.
  DrivingOrbit shifted(int k) const;

  const MapRegistry& registry() const noexcept { return *registry_; }
  const std::shared_ptr<const MapRegistry>& registry_ptr() const noexcept { return registry_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& family() const noexcept { return family_; }
  const std::vector<int>& symbols() const noexcept { return symbols_; }

 private:
  std::shared_ptr<const MapRegistry> registry_;
  int window_;
  std::vector<int> symbols_;
  std::uint64_t seed_;
  std::string family_;
};

/**
 * Samples a driving orbit window of length 2N+1.
 *
 *   iid     {symbols, p}           p sums to 1 within 1e-12
 *   markov  {symbols, transition}  row-stochastic, started from its stationary law
 *   fixed   {sequence}             periodic, fiber(n) = sequence[n mod L]
 *
 * Deterministic in (seed, N, params).
 */
DrivingOrbit sample_orbit(const std::string& family, std::uint64_t seed, int window,
                          const nlohmann::json& params, std::shared_ptr<const MapRegistry> registry);

struct ExpansionReport {
  std::vector<double> lambda_min_per_fiber;  ///< indexed n + N
  double mean_log_lambda = 0.0;
  std::vector<double> K_per_fiber;
  bool expanding_on_average = false;
};

/// Per-fiber min |T'| and C^r surrogates. Throws DegenerateMapError when any
/// fiber has lambda <= 1e-8.
ExpansionReport expansion_report(const DrivingOrbit& orbit, double eps, int grid = 1024);

struct CoveringResult {
  int steps = 0;
  bool covered = false;
};

/// Least n such that the lifted image of the arc [a, b] under T^n (starting at
/// fiber `start`) has length >= 1. Returns {n_max, false} if not reached.
CoveringResult covering_time(const DrivingOrbit& orbit, double eps, double a, double b,
                             int start = 0, int n_max = 10000);

/// Same, for fibers supplied by a callable (used by lazily realized orbits).
CoveringResult covering_time(const std::function<const ParamCircleMap&(int)>& fiber, double eps,
                             double a, double b, int n_max);

}  // namespace qresp
