// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status 0
// only when every criterion passes.
//
//   acceptance --cli <qresp> --configs <dir> --work <dir> [--golden <dir>]

#include <sys/wait.h>

#include <boost/math/special_functions/zeta.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "audit.hpp"
#include "qresp/density.hpp"
#include "qresp/lasota_yorke.hpp"
#include "qresp/polynomial.hpp"
#include "qresp/response.hpp"
#include "qresp/suspension.hpp"
#include "ulam.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qresp;

namespace {

struct Args {
  std::string cli;
  fs::path configs;
  fs::path work;
  fs::path golden;
};

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("missing column " + name);
  }
  double num(std::size_t r, const std::string& name) const { return std::stod(rows[r][col(name)]); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& p) {
  std::stringstream s(slurp(p));
  Csv c;
  std::string line;
  if (std::getline(s, line)) c.header = split(line);
  while (std::getline(s, line))
    if (!line.empty()) c.rows.push_back(split(line));
  return c;
}

struct Line {
  double slope = 0, intercept = 0, r2 = 0;
};

// ordinary least squares, kept separate from the library's fit
Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Line l;
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - l.intercept - l.slope * x[i];
    ss += r * r;
  }
  l.r2 = syy > 0 ? 1.0 - ss / syy : 1.0;
  return l;
}

Line loglog(const std::vector<double>& eps, const std::vector<double>& err) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    x.push_back(std::log(std::abs(eps[i])));
    y.push_back(std::log(err[i]));
  }
  return least_squares(x, y);
}

bool strictly_decreasing_with_eps(const std::vector<double>& eps, const std::vector<double>& err) {
  for (std::size_t i = 1; i < eps.size(); ++i) {
    if (!(std::abs(eps[i]) < std::abs(eps[i - 1]))) return false;
    if (!(err[i] < err[i - 1])) return false;
  }
  return true;
}

class Runner {
 public:
  explicit Runner(Args a) : a_(std::move(a)) {}

  // runs the CLI; returns its exit status
  int run(const fs::path& config, const fs::path& out, int threads) const {
    fs::remove_all(out);
    const std::string cmd = fmt::format("\"{}\" run \"{}\" -o \"{}\" -j {} -q > \"{}\" 2>&1", a_.cli, config.string(),
                                        out.string(), threads, (out.string() + ".log"));
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }

  // first -j1 run of a config, cached
  fs::path primary(const std::string& name, Outcome& o) {
    auto it = primary_.find(name);
    if (it != primary_.end()) return it->second;
    const fs::path out = a_.work / (name + ".j1a");
    const int rc = run(a_.configs / (name + ".json"), out, 1);
    o.require(rc == 0, fmt::format("{}: exit status {}", name, rc));
    primary_[name] = out;
    return out;
  }

  const Args& args() const { return a_; }
  std::vector<fs::path> all_outputs() const {
    std::vector<fs::path> v;
    for (const auto& [k, p] : primary_) v.push_back(p);
    for (const auto& p : extra_) v.push_back(p);
    return v;
  }
  void add_output(const fs::path& p) { extra_.push_back(p); }

 private:
  Args a_;
  std::map<std::string, fs::path> primary_;
  std::vector<fs::path> extra_;
};

MapPtr additive(double base_amp, double pert_amp = 0.0, int pert_freq = 1, double eps_max = 0.1) {
  json p = {{"degree", 2}, {"base", json::array({{{"amp", base_amp}, {"freq", 1}}})}, {"eps_max", eps_max}};
  if (pert_amp != 0.0) p["perturbation"] = json::array({{{"amp", pert_amp}, {"freq", pert_freq}}});
  return builtin_family("additive", p);
}

// ---------------------------------------------------------------------------

Outcome crim_identity(Runner& run) {
  Outcome o;
  const auto map = additive(0.1);
  const std::vector<TrigTerm> t{{0.3, 1, 0.2}, {0.1, 3, 1.0}};
  const auto f = FourierFunction::from_terms(64, t).with_mean(1.0);
  for (int ell = 1; ell <= 3; ++ell) {
    const auto s = select_variant(*map, 0.0, ell, f, 0, 1e-7);
    const double res = s.variant == GVariant::Corrected ? s.residual_corrected : s.residual_paper;
    o.note(fmt::format("ell={} selected={} residual={:.3g} (other {:.3g})", ell, to_string(s.variant), res,
                       s.variant == GVariant::Corrected ? s.residual_paper : s.residual_corrected));
    o.require(s.resolved && res <= 1e-7, fmt::format("ell={} residual {:.3g} > 1e-7", ell, res));
  }
  const auto x = [](int i) { return FormalPolynomial::variable(i); };
  const auto d = formal_derivative(FormalPolynomial() - x(2) * x(2) + x(1) * x(3));
  const auto expected = FormalPolynomial() - x(2) * x(3) + x(1) * x(4);
  o.require(d == expected, "example derivative " + d.to_string());
  o.note("(-x2^2 + x1*x3)' = " + d.to_string());

  const auto out = run.primary("crim_check", o);
  if (!run.args().golden.empty()) {
    o.require(slurp(out / "g_polynomials.txt") == slurp(run.args().golden / "g_polynomials.txt"),
              "CLI G polynomials differ from the golden file");
  }
  const auto csv = read_csv(out / "crim.csv");
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    o.require(csv.rows[r][csv.col("selected")] == "corrected" && csv.num(r, "residual_corrected") <= 1e-7,
              "CLI crim row " + std::to_string(r));
  }
  return o;
}

Outcome lasota_yorke(Runner& run) {
  Outcome o;
  const auto add = additive(0.1, 0.05, 2, 0.5);
  const auto composed = builtin_family(
      "doubling_composed",
      json{{"psi", json::array({{{"amp", 1.0}, {"freq", 1}, {"phase", std::numbers::pi / 2}}})}, {"eps_max", 0.5}});
  const auto eps2 = builtin_family("linear_eps2", json{{"beta", 2}, {"D", json::array({{{"amp", 0.1}, {"freq", 1}}})}});
  LYOptions opt;
  opt.trials = 100;
  opt.M = 32;
  for (const auto& m : {add, composed, eps2}) {
    const auto orbit = DrivingOrbit::constant(m, 0);
    for (int ell = 1; ell <= 3; ++ell) {
      const auto rep = ly_constants(orbit, 0.25, ell, opt);
      const auto& f = rep.fibers.at(0);
      o.require(rep.all_hold(), fmt::format("{} ell={}: C {:.4g} vs {:.4g}, B {:.4g} vs {:.4g}", m->name(), ell,
                                            f.empirical_C, f.C, f.empirical_B, f.B));
      if (ell == 1) o.note(fmt::format("{}: C_1 emp/sym = {:.3g}/{:.3g}", m->name(), f.empirical_C, f.C));
    }
  }
  // beta = 2: top seminorm of L^n cos(2 pi 32 x) along n, and the per-step sup
  const auto lin = builtin_family("linear_eps2", json{{"beta", 2}});
  const auto A = assemble(*lin, 0.0, 32);
  for (int ell = 1; ell <= 3; ++ell) {
    const auto rep = ly_constants(DrivingOrbit::constant(lin, 0), 0.0, ell, opt);
    const double target = std::ldexp(1.0, -ell);
    const double sup = rep.fibers.at(0).empirical_contraction;
    std::vector<double> n, logs;
    auto g = FourierFunction::cosine(32, 32);
    for (int k = 0; k <= 5; ++k) {
      n.push_back(k);
      logs.push_back(std::log(sobolev_seminorm(g, ell, 0, L1Rule::Exact)));
      g = apply(A, g);
    }
    const double slope = std::exp(least_squares(n, logs).slope);
    o.note(fmt::format("ell={} contraction sup={:.12g} slope={:.12g} target={}", ell, sup, slope, target));
    o.require(std::abs(sup - target) <= 1e-8 && std::abs(slope - target) <= 1e-8,
              fmt::format("ell={} contraction off 2^-ell", ell));
  }
  const auto out = run.primary("ly_check", o);
  const auto csv = read_csv(out / "ly.csv");
  for (std::size_t r = 0; r < csv.rows.size(); ++r) o.require(csv.rows[r][csv.col("holds")] == "1", "CLI ly row");
  return o;
}

Outcome equivariant_density_check(Runner& run) {
  Outcome o;
  auto reg = std::make_shared<MapRegistry>();
  reg->add("A", additive(0.05));
  reg->add("B", builtin_family("additive", json{{"degree", 3}, {"shift", 0.2},
                                                {"base", json::array({{{"amp", 0.08}, {"freq", 2}, {"phase", 0.4}}})}}));
  const auto orbit = sample_orbit("iid", 11, 64, json{{"symbols", {"A", "B"}}, {"p", {0.6, 0.4}}}, reg);
  const Discretization disc{32};

  DensityOptions a;
  a.tol = 1e-12;
  const auto r = equivariant_density(orbit, 0.0, 0, disc, a);
  o.require(r.converged, "pullback did not converge");
  const auto& h = r.defect_history;
  std::vector<double> n, logs;
  for (std::size_t k = 1; k < h.size(); ++k) {
    if (h[k] <= 0) continue;
    n.push_back(static_cast<double>(k));
    logs.push_back(std::log(h[k]));
  }
  const auto fit = least_squares(n, logs);
  o.note(fmt::format("defects over {} steps: ratio {:.3g}, R^2 {:.4f}", h.size(), std::exp(fit.slope), fit.r2));
  o.require(fit.slope < 0 && fit.r2 >= 0.9, "defects not geometric");

  DensityOptions u1, u2;
  u1.tol = u2.tol = 1e-9;
  const std::vector<TrigTerm> t{{0.4, 1, 0.3}, {0.2, 3, 1.2}, {0.1, 5, 0.0}};
  u2.initial = FourierFunction::from_terms(32, t).with_mean(1.0);
  const auto h1 = equivariant_density(orbit, 0.0, 0, disc, u1);
  const auto h2 = equivariant_density(orbit, 0.0, 0, disc, u2);
  const double uniq = sobolev_norm(h1.h - h2.h, 1, 0, L1Rule::Exact);
  o.note(fmt::format("uniqueness W11 gap {:.3g}", uniq));
  o.require(h1.converged && h2.converged && uniq <= 1e-8, "two initial conditions disagree");

  const auto map = additive(0.05);
  DensityOptions f;
  f.tol = 1e-11;
  const auto fixed = equivariant_density(DrivingOrbit::constant(map, 64), 0.0, 0, disc, f);
  const testing::UlamOracle ulam(*map, 0.0, 1 << 14);
  const double d = ulam.l1_distance([&](double x) { return fixed.h(x); });
  o.note(fmt::format("Ulam 2^14 L1 distance {:.3g}", d));
  o.require(fixed.converged && d <= 1e-3, "Ulam oracle mismatch");

  for (const char* cfg : {"density_doubling", "density_random"}) {
    const auto out = run.primary(cfg, o);
    const auto csv = read_csv(out / "density_summary.csv");
    for (std::size_t k = 0; k < csv.rows.size(); ++k)
      o.require(csv.rows[k][csv.col("converged")] == "1", std::string(cfg) + " density not converged");
  }
  return o;
}

Outcome stability(Runner& run) {
  Outcome o;
  const std::pair<const char*, double> cases[] = {{"stability_additive", 0.9}, {"stability_eps2", 1.8}};
  for (const auto& [name, min_exp] : cases) {
    const auto out = run.primary(name, o);
    const auto csv = read_csv(out / "stability.csv");
    std::vector<double> eps, err;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      eps.push_back(csv.num(r, "eps"));
      err.push_back(csv.num(r, "error"));
    }
    const auto fit = loglog(eps, err);
    const auto summary = read_json(out / "summary.json");
    o.note(fmt::format("{}: exponent {:.4f}, R^2 {:.4f} over {} eps", name, fit.slope, fit.r2, eps.size()));
    o.require(eps.size() >= 8 && std::abs(eps.front() - 0.125) < 1e-15 && std::abs(eps.back() - 0x1p-10) < 1e-15,
              std::string(name) + " eps grid is not 2^-3..2^-10");
    o.require(fit.slope >= min_exp && fit.r2 >= 0.98, std::string(name) + " fit below threshold");
    o.require(std::abs(summary["fitted_exponent"].get<double>() - fit.slope) < 1e-9,
              std::string(name) + " summary exponent disagrees with the CSV");
  }
  return o;
}

Outcome linear_response(Runner& run) {
  Outcome o;
  const auto psi = FourierFunction::cosine(32, 1);
  const auto orbit = DrivingOrbit::constant(doubling_composed(2, psi, 0.5), 64);
  const auto r = response_series(orbit, 0, {32});
  const double gap = sobolev_norm(r.h_hat - psi, 1, 0, L1Rule::Exact);
  o.note(fmt::format("||h_hat - cos||_W11 = {:.3g}", gap));
  o.require(gap <= 1e-8, "h_hat differs from cos(2 pi x)");

  const auto out = run.primary("response_doubling", o);
  const auto val = read_csv(out / "response_validation.csv");
  std::vector<double> eps, err;
  for (std::size_t k = 0; k < val.rows.size(); ++k) {
    eps.push_back(val.num(k, "eps"));
    err.push_back(val.num(k, "error"));
  }
  const auto fit = loglog(eps, err);
  o.note(fmt::format("validation exponent {:.4f}", fit.slope));
  o.require(fit.slope >= 0.8, "validation exponent below 0.8");

  const auto summary = read_json(out / "summary.json");
  for (const auto& f : summary["fibers"]) {
    const double k = f["observable_koopman"].get<double>(), s = f["observable_series"].get<double>();
    o.note(fmt::format("Koopman {:.15g} vs density {:.15g}", k, s));
    o.require(std::abs(k - s) <= 1e-8, "Koopman and density forms disagree");
  }
  const auto hh = read_csv(out / "response_h_hat.csv");
  for (std::size_t k = 0; k < hh.rows.size(); ++k) {
    const int mode = std::stoi(hh.rows[k][hh.col("k")]);
    const double want = (mode == 1 || mode == -1) ? 0.5 : 0.0;
    o.require(std::abs(hh.num(k, "re") - want) <= 1e-8 && std::abs(hh.num(k, "im")) <= 1e-8,
              "CLI h_hat coefficient " + std::to_string(mode));
  }

  const auto tay = read_csv(out / "taylor.csv");
  std::vector<double> te, tr;
  for (std::size_t k = 0; k < tay.rows.size(); ++k) {
    te.push_back(tay.num(k, "eps"));
    tr.push_back(tay.num(k, "error"));
  }
  const auto tfit = loglog(te, tr);
  o.note(fmt::format("Taylor slope {:.4f}", tfit.slope));
  o.require(tfit.slope >= 0.9, "Taylor slope below 0.9");
  return o;
}

Outcome random_response(Runner& run) {
  Outcome o;
  const auto base = read_json(run.args().configs / "response_random.json");
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    auto cfg = base;
    cfg["driving"]["seed"] = seed;
    const fs::path cfg_path = run.args().work / fmt::format("response_random_seed{}.json", seed);
    std::ofstream(cfg_path) << cfg.dump(2);
    const fs::path out = run.args().work / fmt::format("response_random_seed{}", seed);
    const int rc = run.run(cfg_path, out, 1);
    run.add_output(out);
    o.require(rc == 0, fmt::format("seed {} exit status {}", seed, rc));
    if (rc == 2) continue;
    const auto csv = read_csv(out / "response_validation.csv");
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> per;
    for (std::size_t k = 0; k < csv.rows.size(); ++k) {
      auto& [e, r] = per[std::stoi(csv.rows[k][csv.col("fiber")])];
      e.push_back(csv.num(k, "eps"));
      r.push_back(csv.num(k, "error"));
    }
    o.require(per.size() == 3, "expected 3 fibers");
    std::string line = fmt::format("seed {}:", seed);
    for (const auto& [fiber, er] : per) {
      const auto fit = loglog(er.first, er.second);
      const bool mono = strictly_decreasing_with_eps(er.first, er.second);
      line += fmt::format(" fiber {} exp {:.3f}{}", fiber, fit.slope, mono ? "" : " (not monotone)");
      o.require(mono && fit.slope >= 0.7, fmt::format("seed {} fiber {}", seed, fiber));
    }
    o.note(line);
  }
  return o;
}

Outcome counterexample(Runner& run) {
  Outcome o;
  const double delta = 0.5;
  const auto small = sample_suspension(99, delta, 10000, 1);
  const auto psi = make_psi(0.65, 0.75, 64);
  std::size_t exact = 0;
  for (const auto& s : small) {
    const auto v = quenched_response_value(s, ResponseRoute::ClosedForm, psi, delta, 64);
    exact += std::isfinite(v.value) && v.value == static_cast<double>(s.omega0 - s.i);
  }
  o.require(exact == small.size(), fmt::format("closed form off on {} samples", small.size() - exact));

  double worst = 0.0;
  for (std::size_t j = 0; j < 100; ++j) {
    const auto v = quenched_response_value(small[j], ResponseRoute::Operator, psi, delta, 64);
    worst = std::max(worst, std::abs(v.value - static_cast<double>(small[j].omega0 - small[j].i)));
  }
  o.note(fmt::format("closed form exact on 10^4 samples; operator route max error {:.3g} on 100", worst));
  o.require(worst <= 1e-5, "operator route misses n_c");

  const std::size_t S = 1000000;
  const auto t0 = std::chrono::steady_clock::now();
  const auto states = sample_suspension(2024, delta, S, 1);
  std::vector<double> counts(51, 0.0);
  for (const auto& s : states)
    if (s.covering_time() <= 50) counts[s.covering_time()] += 1;
  double head = 0.0, worst_sigma = 0.0;
  const double z1 = boost::math::zeta(1 + delta), z2 = boost::math::zeta(2 + delta);
  for (int N = 1; N <= 50; ++N) {
    const double p = (z2 - head) / z1;
    head += std::pow(static_cast<double>(N), -(2 + delta));
    worst_sigma = std::max(worst_sigma, std::abs(counts[N] - p * S) / std::sqrt(S * p * (1 - p)));
  }
  o.note(fmt::format("tail law worst deviation {:.2f} sigma", worst_sigma));
  o.require(worst_sigma <= 3.0, "tail law outside 3 sigma");

  std::vector<std::uint64_t> caps;
  for (int e = 4; e <= 14; ++e) caps.push_back(std::uint64_t{1} << e);
  const auto rep = annealed_divergence_experiment(2024, delta, {S}, caps, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<double> lx, ly, ey;
  for (const auto& row : rep.rows) {
    if (row.kind != "cap") continue;
    lx.push_back(std::log(static_cast<double>(row.cap)));
    ly.push_back(std::log(row.truncated_mean));
    ey.push_back(std::log(exact_truncated_mean(delta, row.cap)));
  }
  const double slope = least_squares(lx, ly).slope, exact_slope = least_squares(lx, ey).slope;
  o.note(fmt::format("slope {:.4f} (exact-sum {:.4f}), max sample {}, {:.1f} s", slope, exact_slope, rep.max_sample, secs));
  o.require(lx.size() == caps.size() && std::abs(slope - (1 - delta)) <= 0.15, "annealed slope off 1 - delta");
  o.require(rep.increasing_in_cap && rep.max_sample < RoofLaw::kCap, "annealed means not increasing or capped");
  o.require(secs <= 600, "divergence experiment slower than 10 minutes");

  const auto out = run.primary("counterexample", o);
  const auto summary = read_json(out / "summary.json");
  o.require(summary["quenched_max_abs_diff"].get<double>() <= 1e-5, "CLI quenched routes disagree");
  return o;
}

Outcome conservation(Runner& run, const testing::Audit& audit) {
  Outcome o;
  o.note(fmt::format("in-process: {} densities, {} responses, worst |mean h - 1| {:.2g}, worst |mean h_hat| {:.2g}",
                     audit.densities.load(), audit.responses.load(), audit.worst_mass.load(), audit.worst_mean.load()));
  o.require(audit.violations() == 0, "in-process " + audit.first_violation());
  o.require(audit.densities > 0 && audit.responses > 0, "audit saw nothing");
  long densities = 0, responses = 0;
  for (const auto& out : run.all_outputs()) {
    if (!fs::exists(out / "summary.json")) continue;
    const auto c = read_json(out / "summary.json")["conservation"];
    densities += c["densities"].get<long>();
    responses += c["responses"].get<long>();
    o.require(c["ok"].get<bool>(), out.filename().string() + " conservation");
    if (fs::exists(out / "density.csv")) {
      const auto csv = read_csv(out / "density.csv");
      for (std::size_t k = 0; k < csv.rows.size(); ++k)
        if (csv.rows[k][csv.col("k")] == "0")
          o.require(std::abs(csv.num(k, "re") - 1.0) <= 1e-9, out.filename().string() + " density mean");
    }
    if (fs::exists(out / "response_h_hat.csv")) {
      const auto csv = read_csv(out / "response_h_hat.csv");
      for (std::size_t k = 0; k < csv.rows.size(); ++k)
        if (csv.rows[k][csv.col("k")] == "0")
          o.require(std::abs(csv.num(k, "re")) <= 1e-9, out.filename().string() + " h_hat mean");
    }
  }
  o.note(fmt::format("CLI runs: {} densities, {} responses", densities, responses));
  return o;
}

Outcome determinism(Runner& run) {
  Outcome o;
  const char* configs[] = {"density_random", "stability_additive", "response_random", "ly_check",
                           "crim_check",     "counterexample",     "lyapunov"};
  int compared = 0;
  for (const char* name : configs) {
    const auto a = run.primary(name, o);
    const auto b = run.args().work / (std::string(name) + ".j1b");
    const auto c = run.args().work / (std::string(name) + ".j8");
    const fs::path cfg = run.args().configs / (std::string(name) + ".json");
    o.require(run.run(cfg, b, 1) == 0 && run.run(cfg, c, 8) == 0, std::string(name) + " rerun failed");
    run.add_output(b);
    run.add_output(c);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      const auto fname = e.path().filename();
      if (fname == "run_record.json") continue;
      const auto ref = slurp(e.path());
      o.require(fs::exists(b / fname) && slurp(b / fname) == ref, std::string(name) + "/" + fname.string() + " run 2");
      o.require(fs::exists(c / fname) && slurp(c / fname) == ref, std::string(name) + "/" + fname.string() + " -j8");
      ++files;
    }
    compared += files;
  }
  o.note(fmt::format("{} files byte-identical over 7 experiment types (-j1, -j1, -j8)", compared));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Args args;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string k = argv[i];
    if (k == "--cli") args.cli = argv[i + 1];
    else if (k == "--configs") args.configs = argv[i + 1];
    else if (k == "--work") args.work = argv[i + 1];
    else if (k == "--golden") args.golden = argv[i + 1];
    else {
      std::fprintf(stderr, "unknown option %s\n", k.c_str());
      return 2;
    }
  }
  if (args.cli.empty() || args.configs.empty() || args.work.empty()) {
    std::fprintf(stderr, "usage: acceptance --cli <qresp> --configs <dir> --work <dir> [--golden <dir>]\n");
    return 2;
  }
  fs::create_directories(args.work);

  testing::Audit audit;
  audit.install();
  Runner runner(args);

  struct Item {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Item> items{
      {"crim_identity", [&] { return crim_identity(runner); }},
      {"lasota_yorke", [&] { return lasota_yorke(runner); }},
      {"equivariant_density", [&] { return equivariant_density_check(runner); }},
      {"statistical_stability", [&] { return stability(runner); }},
      {"linear_response", [&] { return linear_response(runner); }},
      {"random_response", [&] { return random_response(runner); }},
      {"appendix_counterexample", [&] { return counterexample(runner); }},
      {"determinism", [&] { return determinism(runner); }},
      {"conservation_positivity", [&] { return conservation(runner, audit); }},
  };
  int failed = 0;
  for (const auto& it : items) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = it.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", it.name, secs);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
  }
  audit.uninstall();
  std::printf("%d/%zu criteria passed\n", static_cast<int>(items.size()) - failed, items.size());
  return failed == 0 ? 0 : 1;
}
