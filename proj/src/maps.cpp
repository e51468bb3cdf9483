#include "qresp/maps.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>

#include "qresp/error.hpp"
#include "qresp/rng.hpp"

namespace qresp {

using nlohmann::json;

namespace {

std::atomic<std::uint64_t> next_uid{1};

double golden_min(const std::function<double(double)>& f, double a, double b, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return std::min(fc, fd);
}

}  // namespace

ParamCircleMap::ParamCircleMap(std::string name, int degree, int smoothness, double eps_max,
                               Callables fns, bool eps_dependent)
    : name_(std::move(name)),
      degree_(degree),
      smoothness_(smoothness),
      eps_max_(eps_max),
      fns_(std::move(fns)),
      eps_dependent_(eps_dependent),
      uid_(next_uid.fetch_add(1)) {
  if (degree < 1) throw DomainError(name_ + ": degree must be >= 1");
  if (smoothness < 4) throw DomainError(name_ + ": smoothness order must be >= 4");
  if (!(eps_max >= 0.0)) throw DomainError(name_ + ": eps_max must be nonnegative");
  if (!fns_.lift || !fns_.dx) throw DomainError(name_ + ": lift and dx callables are required");
}

double ParamCircleMap::dx(double eps, double x, int order) const {
  if (order < 1) throw DomainError("dx: order must be >= 1");
  return fns_.dx(eps, x, order);
}

double ParamCircleMap::de(double eps, double x) const {
  if (!fns_.de) throw DomainError(name_ + ": missing eps-derivative");
  return fns_.de(eps, x);
}

double ParamCircleMap::dee(double eps, double x) const {
  if (!fns_.dee) throw DomainError(name_ + ": missing second eps-derivative");
  return fns_.dee(eps, x);
}

double ParamCircleMap::dedx(double eps, double x) const {
  if (!fns_.dedx) throw DomainError(name_ + ": missing mixed derivative");
  return fns_.dedx(eps, x);
}

double ParamCircleMap::check_derivatives(int points, double step, double tol) const {
  Rng rng(derive_seed(0x5eedULL, static_cast<std::uint64_t>(std::hash<std::string>{}(name_))));
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < points; ++i) {
    const double eps = eps_max_ * 0.99 * (2.0 * uniform01(rng) - 1.0);
    pts.emplace_back(eps, uniform01(rng));
  }
  double worst = 0.0;
  auto compare = [&](const std::string& what, const std::function<double(double, double)>& analytic,
                     const std::function<double(double, double)>& numeric) {
    double scale = 1.0, err = 0.0;
    for (const auto& [e, x] : pts) {
      const double a = analytic(e, x);
      scale = std::max(scale, std::abs(a));
      err = std::max(err, std::abs(a - numeric(e, x)));
    }
    const double rel = err / scale;
    worst = std::max(worst, rel);
    if (rel > tol) {
      throw DomainError(name_ + ": analytic " + what + " disagrees with finite differences (rel " +
                        std::to_string(rel) + ")");
    }
  };
  const double h = step;
  for (int order = 1; order <= smoothness_; ++order) {
    auto lower = [&, order](double e, double x) {
      return order == 1 ? lift(e, x) : dx(e, x, order - 1);
    };
    compare("d^" + std::to_string(order) + "T/dx^" + std::to_string(order),
            [&, order](double e, double x) { return dx(e, x, order); },
            [&](double e, double x) { return (lower(e, x + h) - lower(e, x - h)) / (2 * h); });
  }
  if (has_eps_derivatives()) {
    compare("dT/deps", [&](double e, double x) { return de(e, x); },
            [&](double e, double x) { return (lift(e + h, x) - lift(e - h, x)) / (2 * h); });
    compare("d2T/deps2", [&](double e, double x) { return dee(e, x); },
            [&](double e, double x) { return (de(e + h, x) - de(e - h, x)) / (2 * h); });
    compare("d2T/deps dx", [&](double e, double x) { return dedx(e, x); },
            [&](double e, double x) { return (dx(e + h, x, 1) - dx(e - h, x, 1)) / (2 * h); });
  }
  return worst;
}

double ParamCircleMap::periodicity_residual(double eps, int grid) const {
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = static_cast<double>(i) / grid;
    worst = std::max(worst, std::abs(lift(eps, x + 1.0) - lift(eps, x) - degree_));
  }
  return worst;
}

double ParamCircleMap::min_abs_dx(double eps, int grid) const {
  double best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (int i = 0; i < grid; ++i) {
    const double v = std::abs(dx(eps, static_cast<double>(i) / grid, 1));
    if (v < best) {
      best = v;
      arg = i;
    }
  }
  const double h = 1.0 / grid;
  const double refined = golden_min([&](double x) { return std::abs(dx(eps, x, 1)); },
                                    (arg - 1) * h, (arg + 1) * h, 1e-10);
  return std::min(best, refined);
}

double ParamCircleMap::derivative_bound(double eps, int order, int grid) const {
  double bound = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = static_cast<double>(i) / grid;
    for (int k = 1; k <= order; ++k) bound = std::max(bound, std::abs(dx(eps, x, k)));
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Built-in families

namespace {

std::vector<TrigTerm> parse_terms(const json& params, const std::string& key) {
  std::vector<TrigTerm> terms;
  if (!params.contains(key)) return terms;
  const json& arr = params.at(key);
  if (!arr.is_array()) throw DomainError(key + ": expected an array of {amp, freq, phase}");
  for (const auto& t : arr) {
    if (!t.is_object() || !t.contains("amp") || !t.contains("freq")) {
      throw DomainError(key + ": each term needs amp and freq");
    }
    TrigTerm term;
    term.amp = t.at("amp").get<double>();
    term.freq = t.at("freq").get<int>();
    term.phase = t.value("phase", 0.0);
    if (term.freq < 1) throw DomainError(key + ": freq must be >= 1");
    terms.push_back(term);
  }
  return terms;
}

FourierFunction terms_function(const std::vector<TrigTerm>& terms) {
  int M = 1;
  for (const auto& t : terms) M = std::max(M, t.freq);
  return FourierFunction::from_terms(M, terms);
}

int get_int(const json& p, const char* key, int fallback) {
  return p.contains(key) ? p.at(key).get<int>() : fallback;
}

double get_double(const json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

MapPtr make_identity(int smoothness) {
  ParamCircleMap::Callables c;
  c.lift = [](double, double x) { return x; };
  c.periodic = [](double, double) { return 0.0; };
  c.dx = [](double, double, int order) { return order == 1 ? 1.0 : 0.0; };
  c.de = [](double, double) { return 0.0; };
  c.dee = [](double, double) { return 0.0; };
  c.dedx = [](double, double) { return 0.0; };
  return std::make_shared<ParamCircleMap>("identity", 1, smoothness, 1.0, std::move(c), false);
}

MapPtr make_linear(int degree, int smoothness) {
  ParamCircleMap::Callables c;
  const double d = degree;
  c.lift = [d](double, double x) { return d * x; };
  c.periodic = [](double, double) { return 0.0; };
  c.dx = [d](double, double, int order) { return order == 1 ? d : 0.0; };
  c.de = [](double, double) { return 0.0; };
  c.dee = [](double, double) { return 0.0; };
  c.dedx = [](double, double) { return 0.0; };
  return std::make_shared<ParamCircleMap>(degree == 2 ? "doubling" : "linear" + std::to_string(degree),
                                          degree, smoothness, 1.0, std::move(c), false);
}

MapPtr make_linear_eps2(int beta, FourierFunction D, double eps_max, int smoothness) {
  ParamCircleMap::Callables c;
  const double b = beta;
  auto Dp = std::make_shared<const FourierFunction>(std::move(D));
  c.lift = [b, Dp](double e, double x) { return b * x + e * e * (*Dp)(b * x); };
  c.periodic = [b, Dp](double e, double x) { return e * e * (*Dp)(b * x); };
  c.dx = [b, Dp](double e, double x, int order) {
    const double bn = std::pow(b, order);
    return (order == 1 ? b : 0.0) + e * e * bn * Dp->value(b * x, order);
  };
  c.de = [b, Dp](double e, double x) { return 2.0 * e * (*Dp)(b * x); };
  c.dee = [b, Dp](double, double x) { return 2.0 * (*Dp)(b * x); };
  c.dedx = [b, Dp](double e, double x) { return 2.0 * e * b * Dp->value(b * x, 1); };
  return std::make_shared<ParamCircleMap>("linear_eps2", beta, smoothness, eps_max, std::move(c));
}

MapPtr make_additive(int degree, double shift, FourierFunction base, FourierFunction pert, double eps_max,
                     int smoothness) {
  ParamCircleMap::Callables c;
  const double d = degree;
  auto B = std::make_shared<const FourierFunction>(std::move(base));
  auto P = std::make_shared<const FourierFunction>(std::move(pert));
  c.lift = [d, shift, B, P](double e, double x) { return d * x + shift + (*B)(x) + e * (*P)(x); };
  c.periodic = [shift, B, P](double e, double x) { return shift + (*B)(x) + e * (*P)(x); };
  c.dx = [d, B, P](double e, double x, int order) {
    return (order == 1 ? d : 0.0) + B->value(x, order) + e * P->value(x, order);
  };
  c.de = [P](double, double x) { return (*P)(x); };
  c.dee = [](double, double) { return 0.0; };
  c.dedx = [P](double, double x) { return P->value(x, 1); };
  return std::make_shared<ParamCircleMap>("additive", degree, smoothness, eps_max, std::move(c));
}

}  // namespace

MapPtr doubling_composed(int degree, const FourierFunction& psi, double eps_max) {
  if (std::abs(psi.mean()) > 1e-12) {
    throw DomainError("doubling_composed: psi must have zero mean");
  }
  // S(y) = -int_0^y psi, periodic because psi has zero mean.
  auto S = std::make_shared<const FourierFunction>(psi.antiderivative() * -1.0);
  const double d = degree;
  ParamCircleMap::Callables c;
  c.lift = [d, S](double e, double x) { return d * x + e * (*S)(d * x); };
  c.periodic = [d, S](double e, double x) { return e * (*S)(d * x); };
  c.dx = [d, S](double e, double x, int order) {
    return (order == 1 ? d : 0.0) + e * std::pow(d, order) * S->value(d * x, order);
  };
  c.de = [d, S](double, double x) { return (*S)(d * x); };
  c.dee = [](double, double) { return 0.0; };
  c.dedx = [d, S](double, double x) { return d * S->value(d * x, 1); };
  return std::make_shared<ParamCircleMap>("doubling_composed", degree, 8, eps_max, std::move(c));
}

void check_admissible(const ParamCircleMap& map, double eps_max, int eps_points) {
  for (int i = 0; i < eps_points; ++i) {
    const double eps =
        eps_points == 1 ? 0.0 : -eps_max + 2.0 * eps_max * i / static_cast<double>(eps_points - 1);
    const double lam = map.min_abs_dx(eps, 512);
    if (!(lam > 1e-8)) {
      throw DomainError(map.name() + ": min|T'| = " + std::to_string(lam) + " <= 0 at eps = " +
                        std::to_string(eps) + " (local diffeomorphism check failed)");
    }
    if (map.dx(eps, 0.0, 1) < 0.0) {
      throw DomainError(map.name() + ": orientation-reversing maps are not supported");
    }
  }
}

std::vector<FamilyInfo> list_families() {
  return {
      {"identity", "T(eps, x) = x"},
      {"doubling", "T(eps, x) = d x, unperturbed; params: degree (2)"},
      {"linear_eps2", "T(eps, x) = (Id + eps^2 D)(beta x); params: beta, D, eps_max"},
      {"additive", "T(eps, x) = d x + shift + B(x) + eps P(x); params: degree, shift, base, perturbation, eps_max"},
      {"doubling_composed", "T(eps, x) = D_eps(d x), D_eps(y) = y - eps int_0^y psi; params: degree, psi, eps_max"},
  };
}

MapPtr builtin_family(const std::string& name, const json& params) {
  if (!params.is_object()) throw DomainError(name + ": parameters must be an object");
  const int r = get_int(params, "smoothness", 8);
  MapPtr map;
  double lambda_check_eps = 0.0;
  if (name == "identity") {
    map = make_identity(r);
  } else if (name == "doubling") {
    map = make_linear(get_int(params, "degree", 2), r);
  } else if (name == "linear_eps2") {
    const int beta = get_int(params, "beta", 2);
    if (beta < 1) throw DomainError("linear_eps2: beta must be a positive integer");
    auto terms = parse_terms(params, "D");
    const double eps_max = get_double(params, "eps_max", 0.5);
    map = make_linear_eps2(beta, terms_function(terms), eps_max, r);
    lambda_check_eps = eps_max;
  } else if (name == "additive") {
    const int degree = get_int(params, "degree", 2);
    const double eps_max = get_double(params, "eps_max", 0.1);
    auto base = terms_function(parse_terms(params, "base"));
    auto pert = terms_function(parse_terms(params, "perturbation"));
    // lambda_i - eps_0 max|d_i'| must stay positive.
    double lam = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (int i = 0; i < 2048; ++i) {
      const double x = i / 2048.0;
      lam = std::min(lam, degree + base.value(x, 1));
      dmax = std::max(dmax, std::abs(pert.value(x, 1)));
    }
    if (!(lam - eps_max * dmax > 0.0)) {
      throw DomainError("additive: lambda - eps_max * max|d'| = " + std::to_string(lam - eps_max * dmax) +
                        " <= 0 (min|T'| check)");
    }
    map = make_additive(degree, get_double(params, "shift", 0.0), std::move(base), std::move(pert),
                        eps_max, r);
    lambda_check_eps = eps_max;
  } else if (name == "doubling_composed") {
    auto terms = parse_terms(params, "psi");
    if (terms.empty()) terms.push_back(TrigTerm{1.0, 1, kTwoPi / 4});  // cos(2 pi x)
    const double eps_max = get_double(params, "eps_max", 0.5);
    map = doubling_composed(get_int(params, "degree", 2), terms_function(terms), eps_max);
    lambda_check_eps = eps_max;
  } else {
    throw DomainError("unknown map family '" + name + "'");
  }
  map->check_derivatives();
  for (double e : {-lambda_check_eps, 0.0, lambda_check_eps}) {
    if (map->periodicity_residual(e) >= 1e-10) {
      throw DomainError(name + ": lift is not degree-periodic");
    }
    for (int i = 0; i < 16; ++i) {
      const double x = i / 16.0 + 0.01;
      if (std::abs(map->lift(e, x) - map->degree() * x - map->periodic_part(e, x)) > 1e-12) {
        throw DomainError(name + ": periodic part disagrees with the lift");
      }
    }
  }
  check_admissible(*map, lambda_check_eps);
  return map;
}

// ---------------------------------------------------------------------------
// Registry and driving orbits

void MapRegistry::add(std::string symbol, MapPtr map) {
  if (!map) throw DomainError("MapRegistry: null map for symbol " + symbol);
  if (std::find(symbols_.begin(), symbols_.end(), symbol) != symbols_.end()) {
    throw DomainError("MapRegistry: duplicate symbol " + symbol);
  }
  symbols_.push_back(std::move(symbol));
  maps_.push_back(std::move(map));
}

int MapRegistry::index_of(const std::string& symbol) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) throw DomainError("unknown map symbol '" + symbol + "'");
  return static_cast<int>(it - symbols_.begin());
}

DrivingOrbit::DrivingOrbit(std::shared_ptr<const MapRegistry> registry, int window,
                           std::vector<int> symbols, std::uint64_t seed, std::string family)
    : registry_(std::move(registry)),
      window_(window),
      symbols_(std::move(symbols)),
      seed_(seed),
      family_(std::move(family)) {
  if (!registry_) throw DomainError("DrivingOrbit: null registry");
  if (window < 0) throw DomainError("DrivingOrbit: negative window");
  if (symbols_.size() != static_cast<std::size_t>(2 * window + 1)) {
    throw DomainError("DrivingOrbit: expected 2N+1 fibers");
  }
  for (int s : symbols_) {
    if (s < 0 || s >= registry_->size()) throw DomainError("DrivingOrbit: symbol out of range");
  }
}

DrivingOrbit DrivingOrbit::constant(MapPtr map, int window) {
  auto reg = std::make_shared<MapRegistry>();
  std::string symbol = map->name();
  reg->add(std::move(symbol), std::move(map));
  return DrivingOrbit(std::move(reg), window, std::vector<int>(static_cast<std::size_t>(2 * window + 1), 0),
                      0, "fixed");
}

int DrivingOrbit::symbol(int n) const {
  if (!contains(n)) {
    throw WindowError("fiber " + std::to_string(n) + " outside window [-" + std::to_string(window_) +
                      ", " + std::to_string(window_) + "]");
  }
  return symbols_[static_cast<std::size_t>(n + window_)];
}

const MapPtr& DrivingOrbit::fiber_ptr(int n) const { return registry_->map(symbol(n)); }

DrivingOrbit DrivingOrbit::shifted(int k) const {
  const int w = window_ - std::abs(k);
  if (w < 0) throw WindowError("shift exceeds the orbit window");
  std::vector<int> out(static_cast<std::size_t>(2 * w + 1));
  for (int n = -w; n <= w; ++n) out[static_cast<std::size_t>(n + w)] = symbol(n + k);
  return DrivingOrbit(registry_, w, std::move(out), seed_, family_);
}

namespace {

std::vector<int> resolve_symbols(const json& params, const MapRegistry& reg, const char* key) {
  std::vector<int> idx;
  if (!params.contains(key)) {
    for (int i = 0; i < reg.size(); ++i) idx.push_back(i);
    return idx;
  }
  for (const auto& s : params.at(key)) idx.push_back(reg.index_of(s.get<std::string>()));
  return idx;
}

int categorical(Rng& rng, const std::vector<double>& cdf) {
  const double u = uniform01(rng);
  for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
    if (u < cdf[i]) return static_cast<int>(i);
  }
  return static_cast<int>(cdf.size()) - 1;
}

std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = (acc += p[i]);
  return cdf;
}

std::vector<double> check_probability(const json& arr, std::size_t n, const std::string& what) {
  auto p = arr.get<std::vector<double>>();
  if (p.size() != n) throw DomainError(what + ": expected " + std::to_string(n) + " entries");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DomainError(what + ": negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw DomainError(what + ": probabilities sum to " + std::to_string(sum) + ", not 1");
  }
  return p;
}

}  // namespace

DrivingOrbit sample_orbit(const std::string& family, std::uint64_t seed, int window, const json& params,
                          std::shared_ptr<const MapRegistry> registry) {
  if (!registry) throw DomainError("sample_orbit: null registry");
  if (window < 0) throw DomainError("sample_orbit: negative window");
  const auto len = static_cast<std::size_t>(2 * window + 1);
  std::vector<int> fibers(len);
  Rng rng(seed);
  if (family == "fixed") {
    if (!params.contains("sequence")) throw DomainError("fixed: missing 'sequence'");
    const auto seq = resolve_symbols(params, *registry, "sequence");
    if (seq.empty()) throw DomainError("fixed: empty sequence");
    const int L = static_cast<int>(seq.size());
    for (int n = -window; n <= window; ++n) {
      fibers[static_cast<std::size_t>(n + window)] = seq[static_cast<std::size_t>(((n % L) + L) % L)];
    }
  } else if (family == "iid") {
    const auto symbols = resolve_symbols(params, *registry, "symbols");
    if (!params.contains("p")) throw DomainError("iid: missing probability vector 'p'");
    const auto cdf = cumulative(check_probability(params.at("p"), symbols.size(), "iid.p"));
    for (auto& f : fibers) f = symbols[static_cast<std::size_t>(categorical(rng, cdf))];
  } else if (family == "markov") {
    const auto symbols = resolve_symbols(params, *registry, "symbols");
    if (!params.contains("transition")) throw DomainError("markov: missing 'transition'");
    const auto& tr = params.at("transition");
    const std::size_t n = symbols.size();
    if (!tr.is_array() || tr.size() != n) throw DomainError("markov: transition must be square");
    std::vector<std::vector<double>> cdfs;
    Eigen::MatrixXd P(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto row = check_probability(tr.at(i), n, "markov.transition[" + std::to_string(i) + "]");
      for (std::size_t j = 0; j < n; ++j) P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
      cdfs.push_back(cumulative(row));
    }
    // Stationary law: pi (P - I) = 0, sum pi = 1.
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(n));
    A.topRows(static_cast<Eigen::Index>(n)) = P.transpose() - Eigen::MatrixXd::Identity(P.rows(), P.cols());
    A.row(static_cast<Eigen::Index>(n)).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n + 1));
    rhs(static_cast<Eigen::Index>(n)) = 1.0;
    Eigen::VectorXd pi = A.colPivHouseholderQr().solve(rhs);
    std::vector<double> start(n);
    for (std::size_t i = 0; i < n; ++i) start[i] = std::max(0.0, pi(static_cast<Eigen::Index>(i)));
    double s = 0.0;
    for (double v : start) s += v;
    for (double& v : start) v /= s;
    int state = categorical(rng, cumulative(start));
    for (auto& f : fibers) {
      f = symbols[static_cast<std::size_t>(state)];
      state = categorical(rng, cdfs[static_cast<std::size_t>(state)]);
    }
  } else {
    throw DomainError("unknown driving family '" + family + "'");
  }
  return DrivingOrbit(std::move(registry), window, std::move(fibers), seed, family);
}

ExpansionReport expansion_report(const DrivingOrbit& orbit, double eps, int grid) {
  if (grid < 256) throw DomainError("expansion_report: grid must be >= 256");
  ExpansionReport rep;
  std::map<std::uint64_t, std::pair<double, double>> seen;
  double acc = 0.0;
  for (int n = -orbit.window(); n <= orbit.window(); ++n) {
    const auto& map = orbit.fiber(n);
    auto it = seen.find(map.uid());
    if (it == seen.end()) {
      const double lam = map.min_abs_dx(eps, grid);
      if (!(lam > 1e-8)) {
        throw DegenerateMapError("fiber " + std::to_string(n) + " (" + map.name() +
                                 ") has min|T'| = " + std::to_string(lam));
      }
      it = seen.emplace(map.uid(), std::make_pair(lam, map.derivative_bound(eps, map.smoothness(), grid)))
               .first;
    }
    rep.lambda_min_per_fiber.push_back(it->second.first);
    rep.K_per_fiber.push_back(it->second.second);
    acc += std::log(it->second.first);
  }
  rep.mean_log_lambda = acc / static_cast<double>(rep.lambda_min_per_fiber.size());
  rep.expanding_on_average = rep.mean_log_lambda > 0.0;
  return rep;
}

CoveringResult covering_time(const std::function<const ParamCircleMap&(int)>& fiber, double eps, double a,
                             double b, int n_max) {
  if (!(b > a)) throw DomainError("covering_time: degenerate arc");
  double lo = a, hi = b;
  if (hi - lo >= 1.0) return {0, true};
  for (int n = 1; n <= n_max; ++n) {
    const auto& T = fiber(n - 1);
    const double shift = std::floor(lo);
    lo -= shift;
    hi -= shift;
    lo = T.lift(eps, lo);
    hi = T.lift(eps, hi);
    if (hi - lo >= 1.0) return {n, true};
  }
  return {n_max, false};
}

CoveringResult covering_time(const DrivingOrbit& orbit, double eps, double a, double b, int start,
                             int n_max) {
  const int available = orbit.window() - start + 1;
  return covering_time([&](int k) -> const ParamCircleMap& { return orbit.fiber(start + k); }, eps, a, b,
                       std::min(n_max, available));
}

}  // namespace qresp
