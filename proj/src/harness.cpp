#include "qresp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "qresp/density.hpp"
#include "qresp/error.hpp"
#include "qresp/lasota_yorke.hpp"
#include "qresp/maps.hpp"
#include "qresp/parallel.hpp"
#include "qresp/polynomial.hpp"
#include "qresp/response.hpp"
#include "qresp/rng.hpp"
#include "qresp/suspension.hpp"

#ifndef QRESP_VERSION
#define QRESP_VERSION "0.0.0"
#endif

namespace qresp {

using json = nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& experiment_tags() {
  static const std::vector<std::string> tags = {"density",    "stability",      "response", "ly_check",
                                                "crim_check", "counterexample", "lyapunov"};
  return tags;
}

const char* tool_version() { return "qresp " QRESP_VERSION; }

std::string format_double(double x) {
  if (x == 0.0) return "0";
  return fmt::format("{}", x);
}

namespace {

std::string digest_hex(const EVP_MD* md, std::string_view bytes) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out, &len, md, nullptr) != 1) throw Error("digest failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", out[i]);
  return hex;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) { return digest_hex(EVP_sha256(), bytes); }

std::string git_blob_id(std::string_view bytes) {
  std::string obj = "blob " + std::to_string(bytes.size());
  obj.push_back('\0');
  obj.append(bytes);
  return digest_hex(EVP_sha1(), obj);
}

// ---------------------------------------------------------------------------
// Schema

namespace {

json cos_terms() { return json::array({{{"amp", 1.0}, {"freq", 1}, {"phase", kTwoPi / 4}}}); }

json experiment_defaults(const std::string& tag) {
  if (tag == "density") return {{"fibers", {0}}, {"ell_check", 1}, {"confirm", 2}};
  if (tag == "stability") return {{"fibers", {0}}, {"ell", 1}};
  if (tag == "response") {
    return {{"fibers", {0}}, {"N", -1},         {"term_tol", 1e-12},
            {"max_terms", 64}, {"observable", cos_terms()}, {"taylor", true}};
  }
  if (tag == "ly_check") {
    return {{"ells", {1, 2, 3}}, {"trials", 100}, {"variant", "corrected"}, {"seed", 7}, {"eps", 0.0}};
  }
  if (tag == "crim_check") {
    return {{"ells", {1, 2, 3}},
            {"fiber", 0},
            {"eps", 0.0},
            {"test", json::array({{{"amp", 0.3}, {"freq", 1}, {"phase", 0.2}},
                                  {{"amp", 0.1}, {"freq", 3}, {"phase", 1.0}}})}};
  }
  if (tag == "counterexample") {
    return {{"delta", 0.5},
            {"seed", 2024},
            {"sample_sizes", {1000, 10000, 100000}},
            {"caps", {16, 64, 256, 1024, 4096, 16384}},
            {"quenched_samples", 0},
            {"quenched_M", 64},
            {"interval", {0.7, 0.8}}};
  }
  if (tag == "lyapunov") {
    return {{"ell", 1},  {"n_max", 40}, {"trials", 32},   {"start", 0},
            {"eps", 0.0}, {"decay_tests", 4}, {"decay_n", 30}};
  }
  return json::object();
}

bool needs_cocycle(const std::string& tag) { return tag != "counterexample"; }

class Checker {
 public:
  explicit Checker(std::string_view text) : text_(text) {}

  void error(const std::string& field, const std::string& message) {
    diags_.push_back({field, message, locate(field)});
  }
  bool ok() const { return diags_.empty(); }
  std::vector<Diagnostic>& diagnostics() { return diags_; }

  void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        error(join(path, it.key()), "unknown key");
      }
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  std::optional<long long> integer(const json& obj, const std::string& path, const char* key, long long fallback,
                                   long long lo, long long hi) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      error(join(path, key), "expected an integer");
      return std::nullopt;
    }
    const long long x = v.is_number_unsigned() ? static_cast<long long>(v.get<std::uint64_t>()) : v.get<long long>();
    if (x < lo || x > hi) {
      error(join(path, key), fmt::format("value {} outside [{}, {}]", x, lo, hi));
      return std::nullopt;
    }
    return x;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      error(join(path, key), "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

 private:
  int locate(const std::string& field) const {
    if (text_.empty() || field.empty()) return 0;
    std::string last = field.substr(field.rfind('.') == std::string::npos ? 0 : field.rfind('.') + 1);
    last = last.substr(0, last.find('['));
    const std::string needle = "\"" + last + "\"";
    const auto pos = text_.find(needle);
    if (pos == std::string_view::npos || text_.find(needle, pos + 1) != std::string_view::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  std::string_view text_;
  std::vector<Diagnostic> diags_;
};

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  return true;
}

const char* kind_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number()) return "a number";
  if (def.is_string()) return "a string";
  if (def.is_array()) return "an array";
  return "a value";
}

std::vector<TrigTerm> terms_from_json(const json& arr) {
  std::vector<TrigTerm> out;
  for (const auto& t : arr) {
    out.push_back(TrigTerm{t.at("amp").get<double>(), t.at("freq").get<int>(), t.value("phase", 0.0)});
  }
  return out;
}

bool check_terms(Checker& ck, const json& arr, const std::string& path) {
  bool good = true;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& t = arr[i];
    const std::string p = fmt::format("{}[{}]", path, i);
    if (!t.is_object() || !t.contains("amp") || !t.contains("freq") || !t.at("amp").is_number() ||
        !t.at("freq").is_number_integer() || t.at("freq").get<int>() < 1 ||
        (t.contains("phase") && !t.at("phase").is_number())) {
      ck.error(p, "expected {amp: number, freq: integer >= 1, phase: number}");
      good = false;
    }
  }
  return good;
}

FourierFunction terms_function(const json& arr, int M) {
  const auto terms = terms_from_json(arr);
  return FourierFunction::from_terms(M, terms);
}

struct Built {
  std::shared_ptr<MapRegistry> registry;
  std::optional<DrivingOrbit> orbit;
};

/// Builds the maps and the orbit, reporting failures as diagnostics.
Built build_cocycle(Checker& ck, const ExperimentConfig& cfg) {
  Built b;
  b.registry = std::make_shared<MapRegistry>();
  bool maps_ok = true;
  for (auto it = cfg.maps.begin(); it != cfg.maps.end(); ++it) {
    const std::string path = "cocycle.maps." + it.key();
    const json& spec = it.value();
    try {
      b.registry->add(it.key(), builtin_family(spec.at("family").get<std::string>(), spec.at("params")));
    } catch (const Error& e) {
      ck.error(path + ".params", e.what());
      maps_ok = false;
    } catch (const json::exception& e) {
      ck.error(path + ".params", e.what());
      maps_ok = false;
    }
  }
  if (!maps_ok) return b;
  try {
    b.orbit = sample_orbit(cfg.driving_family, cfg.seed, cfg.window, cfg.driving_params, b.registry);
  } catch (const Error& e) {
    ck.error("driving.params", e.what());
  } catch (const json::exception& e) {
    ck.error("driving.params", e.what());
  }
  return b;
}

void check_eps_admissible(Checker& ck, const MapRegistry& reg, double eps, const std::string& field) {
  for (int i = 0; i < reg.size(); ++i) {
    const auto& m = *reg.map(i);
    if (!m.eps_dependent() || std::abs(eps) <= m.eps_max()) continue;
    std::string detail;
    try {
      detail = fmt::format(", min|T'| = {} at this eps", format_double(m.min_abs_dx(eps)));
    } catch (const Error&) {
    }
    ck.error(field, fmt::format("eps = {} outside the admissible range |eps| <= {} of map '{}' (min|T'| > 0 check{})",
                                format_double(eps), format_double(m.eps_max()), reg.symbol(i), detail));
  }
}

/// Fills `cfg` from `config`; every problem becomes a diagnostic.
void parse_into(Checker& ck, const json& config, ExperimentConfig& cfg) {
  if (!config.is_object()) {
    ck.error("", "config must be a JSON object");
    return;
  }
  ck.allow_keys(config, "",
                {"experiment", "cocycle", "driving", "discretization", "eps_grid", "params", "output", "threads",
                 "description"});

  if (!config.contains("experiment") || !config.at("experiment").is_string()) {
    ck.error("experiment", "required string, one of " + fmt::format("{}", fmt::join(experiment_tags(), ", ")));
    return;
  }
  cfg.experiment = config.at("experiment").get<std::string>();
  const auto& tags = experiment_tags();
  if (std::find(tags.begin(), tags.end(), cfg.experiment) == tags.end()) {
    ck.error("experiment", "unknown experiment '" + cfg.experiment + "'");
    return;
  }

  // cocycle
  std::string single_symbol;
  if (config.contains("cocycle")) {
    const json& c = config.at("cocycle");
    if (!c.is_object()) {
      ck.error("cocycle", "expected an object");
    } else if (c.contains("family")) {
      ck.allow_keys(c, "cocycle", {"family", "params"});
      single_symbol = "A";
      cfg.maps = json::object();
      cfg.maps["A"] = {{"family", c.at("family")}, {"params", c.value("params", json::object())}};
    } else if (c.contains("maps") && c.at("maps").is_object() && !c.at("maps").empty()) {
      ck.allow_keys(c, "cocycle", {"maps"});
      cfg.maps = json::object();
      for (auto it = c.at("maps").begin(); it != c.at("maps").end(); ++it) {
        const std::string path = "cocycle.maps." + it.key();
        if (!it.value().is_object()) {
          ck.error(path, "expected {family, params}");
          continue;
        }
        ck.allow_keys(it.value(), path, {"family", "params"});
        cfg.maps[it.key()] = {{"family", it.value().value("family", json())},
                              {"params", it.value().value("params", json::object())}};
      }
      if (cfg.maps.size() == 1) single_symbol = cfg.maps.begin().key();
    } else {
      ck.error("cocycle", "expected {family, params} or a non-empty {maps: {symbol: {family, params}}}");
    }
  } else if (needs_cocycle(cfg.experiment)) {
    ck.error("cocycle", "required for experiment '" + cfg.experiment + "'");
  }
  std::set<std::string> families;
  for (const auto& f : list_families()) families.insert(f.name);
  for (auto it = cfg.maps.begin(); it != cfg.maps.end(); ++it) {
    const std::string path = "cocycle.maps." + it.key();
    const json& fam = it.value().at("family");
    if (!fam.is_string()) {
      ck.error(path + ".family", "required string");
    } else if (!families.count(fam.get<std::string>())) {
      ck.error(path + ".family", "unknown map family '" + fam.get<std::string>() + "' (see list-families)");
    }
    if (!it.value().at("params").is_object()) ck.error(path + ".params", "expected an object");
  }

  // driving
  json driving = config.value("driving", json::object());
  if (!driving.is_object()) {
    ck.error("driving", "expected an object");
    driving = json::object();
  }
  ck.allow_keys(driving, "driving", {"family", "seed", "window", "params"});
  cfg.driving_family = driving.value("family", std::string("fixed"));
  if (driving.contains("family") && !driving.at("family").is_string()) ck.error("driving.family", "expected a string");
  if (cfg.driving_family != "fixed" && cfg.driving_family != "iid" && cfg.driving_family != "markov") {
    ck.error("driving.family", "unknown driving family '" + cfg.driving_family + "' (fixed, iid, markov)");
  }
  if (driving.contains("seed") && !driving.at("seed").is_number_unsigned() &&
      !(driving.at("seed").is_number_integer() && driving.at("seed").get<long long>() >= 0)) {
    ck.error("driving.seed", "expected a non-negative integer");
  } else if (driving.contains("seed")) {
    cfg.seed = driving.at("seed").get<std::uint64_t>();
  }
  if (auto w = ck.integer(driving, "driving", "window", 64, 1, 1 << 20)) cfg.window = static_cast<int>(*w);
  if (driving.contains("params")) {
    if (!driving.at("params").is_object()) {
      ck.error("driving.params", "expected an object");
    } else {
      cfg.driving_params = driving.at("params");
    }
  } else if (cfg.driving_family == "fixed" && !single_symbol.empty()) {
    cfg.driving_params = {{"sequence", {single_symbol}}};
  } else if (needs_cocycle(cfg.experiment) && config.contains("cocycle")) {
    ck.error("driving.params", "required unless the cocycle has a single map and the driving family is fixed");
  }

  // discretization
  json disc = config.value("discretization", json::object());
  if (!disc.is_object()) {
    ck.error("discretization", "expected an object");
    disc = json::object();
  }
  ck.allow_keys(disc, "discretization", {"M", "Q", "tol"});
  if (auto m = ck.integer(disc, "discretization", "M", 32, 1, 1024)) cfg.M = static_cast<int>(*m);
  if (auto q = ck.integer(disc, "discretization", "Q", 0, 0, 1 << 24)) {
    cfg.Q = static_cast<int>(*q);
    if (cfg.Q != 0 && cfg.Q < 4 * cfg.M + 4) {
      ck.error("discretization.Q", fmt::format("Q = {} aliases M = {}; need 0 (default) or Q >= 4M+4 = {}", cfg.Q,
                                               cfg.M, 4 * cfg.M + 4));
    }
  }
  if (auto t = ck.number(disc, "discretization", "tol", 1e-9)) {
    cfg.tol = *t;
    if (!(cfg.tol > 0.0)) ck.error("discretization.tol", "must be positive");
  }

  // eps_grid
  const bool eps_required = cfg.experiment == "stability" || cfg.experiment == "response";
  if (config.contains("eps_grid")) {
    const json& g = config.at("eps_grid");
    if (!g.is_array() || std::any_of(g.begin(), g.end(), [](const json& v) { return !v.is_number(); })) {
      ck.error("eps_grid", "expected an array of numbers");
    } else {
      for (const auto& v : g) cfg.eps_grid.push_back(v.get<double>());
    }
  } else if (eps_required) {
    ck.error("eps_grid", "required for experiment '" + cfg.experiment + "'");
  }
  if (eps_required && !cfg.eps_grid.empty()) {
    if (cfg.eps_grid.size() < 3) ck.error("eps_grid", "need at least 3 values for a rate fit");
    for (std::size_t i = 0; i < cfg.eps_grid.size(); ++i) {
      if (cfg.eps_grid[i] == 0.0) ck.error(fmt::format("eps_grid[{}]", i), "must be nonzero");
      if (i > 0 && !(std::abs(cfg.eps_grid[i]) < std::abs(cfg.eps_grid[i - 1]))) {
        ck.error(fmt::format("eps_grid[{}]", i), "values must strictly decrease in magnitude");
      }
    }
  }

  // params
  const json defaults = experiment_defaults(cfg.experiment);
  cfg.params = defaults;
  if (config.contains("params")) {
    const json& p = config.at("params");
    if (!p.is_object()) {
      ck.error("params", "expected an object");
    } else {
      for (auto it = p.begin(); it != p.end(); ++it) {
        const std::string path = "params." + it.key();
        if (!defaults.contains(it.key())) {
          ck.error(path, "unknown key for experiment '" + cfg.experiment + "'");
        } else if (!same_kind(defaults.at(it.key()), it.value())) {
          ck.error(path, std::string("expected ") + kind_name(defaults.at(it.key())));
        } else {
          cfg.params[it.key()] = it.value();
        }
      }
    }
  }

  // output, threads
  cfg.output = "qresp_out/" + cfg.experiment;
  if (config.contains("output")) {
    if (!config.at("output").is_string() || config.at("output").get<std::string>().empty()) {
      ck.error("output", "expected a non-empty directory path");
    } else {
      cfg.output = config.at("output").get<std::string>();
    }
  }
  if (auto t = ck.integer(config, "", "threads", 0, 0, 1024)) cfg.threads = static_cast<int>(*t);
}

void check_int_list(Checker& ck, const json& arr, const std::string& path, long long lo, long long hi) {
  if (arr.empty()) ck.error(path, "must not be empty");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number_integer() || arr[i].get<long long>() < lo || arr[i].get<long long>() > hi) {
      ck.error(fmt::format("{}[{}]", path, i), fmt::format("expected an integer in [{}, {}]", lo, hi));
    }
  }
}

/// Experiment-specific checks that need the resolved params and the maps.
void check_params(Checker& ck, const ExperimentConfig& cfg, const Built& built) {
  const json& p = cfg.params;
  const std::string& tag = cfg.experiment;
  const int W = cfg.window;
  auto getd = [&](const char* k) { return p.at(k).get<double>(); };
  auto geti = [&](const char* k) { return p.at(k).get<long long>(); };
  auto at_least = [&](const char* k, long long lo) {
    if (geti(k) < lo) ck.error(std::string("params.") + k, fmt::format("must be >= {}", lo));
  };

  if (tag == "density" || tag == "stability" || tag == "response") {
    check_int_list(ck, p.at("fibers"), "params.fibers", -W, W);
  }
  if (tag == "density") {
    at_least("ell_check", 0);
    at_least("confirm", 1);
  } else if (tag == "stability") {
    at_least("ell", 0);
  } else if (tag == "response") {
    at_least("max_terms", 1);
    if (!(getd("term_tol") > 0.0)) ck.error("params.term_tol", "must be positive");
    if (geti("N") >= 0) {
      for (const auto& f : p.at("fibers")) {
        if (f.is_number_integer() && f.get<long long>() - geti("N") - 1 < -W) {
          ck.error("params.N", fmt::format("{} terms reach past the window at fiber {}", geti("N") + 1,
                                           f.get<long long>()));
        }
      }
    }
    check_terms(ck, p.at("observable"), "params.observable");
  } else if (tag == "ly_check" || tag == "crim_check") {
    check_int_list(ck, p.at("ells"), "params.ells", 0, 7);
    if (tag == "ly_check") {
      at_least("trials", 16);
      at_least("seed", 0);
      const auto v = p.at("variant").get<std::string>();
      if (v != "corrected" && v != "paper") ck.error("params.variant", "expected 'corrected' or 'paper'");
    } else {
      if (geti("fiber") < -W || geti("fiber") > W) ck.error("params.fiber", "outside the driving window");
      check_terms(ck, p.at("test"), "params.test");
    }
  } else if (tag == "counterexample") {
    const double delta = getd("delta");
    if (!(delta > 0.0 && delta <= 1.0)) ck.error("params.delta", "expected 0 < delta <= 1");
    at_least("seed", 0);
    check_int_list(ck, p.at("sample_sizes"), "params.sample_sizes", 1, 100000000);
    check_int_list(ck, p.at("caps"), "params.caps", 1, 1LL << 40);
    at_least("quenched_samples", 0);
    at_least("quenched_M", 4);
    const auto& I = p.at("interval");
    if (I.size() != 2 || !I[0].is_number() || !I[1].is_number()) {
      ck.error("params.interval", "expected [a, b]");
    } else {
      try {
        make_psi(I[0].get<double>(), I[1].get<double>(), 8);
      } catch (const Error& e) {
        ck.error("params.interval", e.what());
      }
    }
  } else if (tag == "lyapunov") {
    at_least("ell", 0);
    at_least("n_max", 2);
    at_least("trials", 16);
    at_least("decay_tests", 1);
    at_least("decay_n", 2);
    const long long start = geti("start");
    if (start < -W || start + std::max(geti("n_max"), geti("decay_n")) > W + 1) {
      ck.error("params.start", fmt::format("start + max(n_max, decay_n) must stay within the window [-{}, {}]", W, W));
    }
  }

  if (!built.registry || !built.orbit) return;
  for (std::size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    check_eps_admissible(ck, *built.registry, cfg.eps_grid[i], fmt::format("eps_grid[{}]", i));
  }
  if (p.contains("eps")) check_eps_admissible(ck, *built.registry, getd("eps"), "params.eps");
  if (tag == "response") {
    for (int i = 0; i < built.registry->size(); ++i) {
      if (!built.registry->map(i)->has_eps_derivatives()) {
        ck.error("cocycle.maps." + built.registry->symbol(i), "map has no eps-derivatives for the response series");
      }
    }
  }
}

}  // namespace

json ExperimentConfig::to_json() const {
  json eps = json::array();
  for (double e : eps_grid) eps.push_back(e);
  return {{"experiment", experiment},
          {"cocycle", {{"maps", maps}}},
          {"driving", {{"family", driving_family}, {"seed", seed}, {"window", window}, {"params", driving_params}}},
          {"discretization", {{"M", M}, {"Q", Q}, {"tol", tol}}},
          {"eps_grid", eps},
          {"params", params},
          {"output", output},
          {"threads", threads}};
}

ValidationResult validate_config(const json& config, std::string_view source_text) {
  ValidationResult r;
  Checker ck(source_text);
  ExperimentConfig cfg;
  parse_into(ck, config, cfg);
  if (ck.ok()) {
    Built built;
    if (needs_cocycle(cfg.experiment)) built = build_cocycle(ck, cfg);
    check_params(ck, cfg, built);
  }
  r.ok = ck.ok();
  r.diagnostics = std::move(ck.diagnostics());
  if (r.ok) r.resolved = cfg.to_json();
  return r;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parses JSON (comments allowed); on failure fills a line/column diagnostic.
std::optional<json> parse_text(const std::string& text, ValidationResult& r) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto nl = static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
    const auto last_nl = text.rfind('\n', byte == 0 ? 0 : byte - 1);
    const std::size_t col = last_nl == std::string::npos || byte == 0 ? byte + 1 : byte - last_nl;
    r.ok = false;
    r.diagnostics.push_back({"<syntax>", fmt::format("line {}, column {}: {}", nl + 1, col, e.what()), nl + 1});
    return std::nullopt;
  }
}

}  // namespace

ValidationResult validate_file(const std::string& path) {
  ValidationResult r;
  std::string text;
  try {
    text = read_file(path);
  } catch (const ConfigError& e) {
    r.diagnostics.push_back({e.field(), e.what(), 0});
    return r;
  }
  auto cfg = parse_text(text, r);
  if (!cfg) return r;
  return validate_config(*cfg, text);
}

ExperimentConfig parse_config(const json& config) {
  Checker ck({});
  ExperimentConfig cfg;
  parse_into(ck, config, cfg);
  if (ck.ok()) {
    Built built;
    if (needs_cocycle(cfg.experiment)) built = build_cocycle(ck, cfg);
    check_params(ck, cfg, built);
  }
  if (!ck.ok()) {
    const auto& d = ck.diagnostics().front();
    throw ConfigError(d.field, d.message);
  }
  return cfg;
}

json RunRecord::to_json() const {
  json outs = json::array();
  for (const auto& o : outputs) {
    outs.push_back({{"name", o.name}, {"path", o.path}, {"rows", o.rows}, {"sha256", o.sha256}});
  }
  json j = {{"exit_code", exit_code},       {"flags", flags},           {"outputs", outs},
            {"summary", summary},           {"wall_time_seconds", wall_time},
            {"config_sha256", config_sha256}, {"inputs_digest", inputs_digest},
            {"tool_version", tool_version}};
  if (!error.empty()) j["error"] = error;
  return j;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

std::string cell(double x) { return format_double(x); }
std::string cell(int x) { return std::to_string(x); }
std::string cell(std::uint64_t x) { return std::to_string(x); }
std::string cell(bool x) { return x ? "1" : "0"; }
std::string cell(const std::string& s) { return s; }

class Table {
 public:
  explicit Table(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
  }

  template <class... T>
  void row(const T&... values) {
    std::string line;
    ((line += cell(values), line += ','), ...);
    line.back() = '\n';
    text_ += line;
    ++rows_;
  }

  const std::string& text() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  std::string text_;
  std::size_t rows_ = 0;
};

/// Two-column plot data; blocks separated by blank lines.
class PlotData {
 public:
  explicit PlotData(const std::string& columns) { text_ = "# " + columns + "\n"; }
  void block(const std::string& label) {
    if (blocks_++ > 0) text_ += "\n\n";
    text_ += "# " + label + "\n";
  }
  void point(double x, double y) {
    text_ += format_double(x) + " " + format_double(y) + "\n";
    ++rows_;
  }
  const std::string& text() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  std::string text_;
  std::size_t rows_ = 0;
  int blocks_ = 0;
};

struct Context {
  ExperimentConfig cfg;
  fs::path out;
  int threads = 1;
  std::shared_ptr<MapRegistry> registry;
  std::optional<DrivingOrbit> orbit;
  Discretization disc;
  std::vector<std::string> flags;
  std::vector<OutputTable> outputs;
  json summary = json::object();

  void save(const std::string& name, const std::string& text, std::size_t rows) {
    const fs::path p = out / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    f << text;
    if (!f) throw Error("write failed for '" + p.string() + "'");
    outputs.push_back({name, p.string(), rows, sha256_hex(text)});
  }
  void save(const std::string& name, const Table& t) { save(name, t.text(), t.rows()); }
  void save(const std::string& name, const PlotData& d) { save(name, d.text(), d.rows()); }
  void flag(std::string s) { flags.push_back(std::move(s)); }

  const DrivingOrbit& driving() const { return *orbit; }
  DensityOptions density_options() const {
    DensityOptions o;
    o.tol = cfg.tol;
    return o;
  }
};

std::vector<int> int_list(const json& arr) {
  std::vector<int> v;
  for (const auto& x : arr) v.push_back(x.get<int>());
  return v;
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : -HUGE_VAL; }

json rate_json(const RateFit& f) {
  return {{"fitted_exponent", f.fitted_exponent}, {"fitted_prefactor", f.fitted_prefactor},
          {"r_squared", f.r_squared},             {"fit_points", f.fit_points},
          {"exact", f.exact},                     {"monotone", f.monotone},
          {"refused", f.refused},                 {"reason", f.reason}};
}

void run_density(Context& ctx) {
  const auto fibers = int_list(ctx.cfg.params.at("fibers"));
  const std::vector<double> eps = ctx.cfg.eps_grid.empty() ? std::vector<double>{0.0} : ctx.cfg.eps_grid;
  auto opt = ctx.density_options();
  opt.ell_check = ctx.cfg.params.at("ell_check").get<int>();
  opt.confirm = ctx.cfg.params.at("confirm").get<int>();

  const int n = static_cast<int>(fibers.size() * eps.size());
  std::vector<DensityResult> res(static_cast<std::size_t>(n));
  parallel_for(n, ctx.threads, [&](int t) {
    const auto i = static_cast<std::size_t>(t);
    res[i] = equivariant_density(ctx.driving(), eps[i % eps.size()], fibers[i / eps.size()], ctx.disc, opt);
  });

  Table coeffs({"fiber", "eps", "k", "re", "im", "defect"});
  Table summary({"fiber", "eps", "pullback_depth", "cauchy_defect", "converged", "mass_drift", "grid_min"});
  Table defects({"fiber", "eps", "step", "defect"});
  json rows = json::array();
  double max_defect = 0.0, max_drift = 0.0, min_grid = HUGE_VAL;
  bool all_converged = true;
  for (const auto& r : res) {
    for (int k = -r.h.modes(); k <= r.h.modes(); ++k) {
      coeffs.row(r.fiber, r.eps, k, r.h.coeff(k).real(), r.h.coeff(k).imag(), r.cauchy_defect);
    }
    summary.row(r.fiber, r.eps, r.pullback_depth, r.cauchy_defect, r.converged, r.mass_drift, r.grid_min);
    for (std::size_t s = 0; s < r.defect_history.size(); ++s) {
      defects.row(r.fiber, r.eps, static_cast<int>(s + 1), r.defect_history[s]);
    }
    if (!r.converged) ctx.flag(fmt::format("density fiber={} eps={} did not converge", r.fiber, cell(r.eps)));
    if (r.grid_min <= 0.0) ctx.flag(fmt::format("density fiber={} eps={} not positive", r.fiber, cell(r.eps)));
    all_converged = all_converged && r.converged;
    max_defect = std::max(max_defect, r.cauchy_defect);
    max_drift = std::max(max_drift, r.mass_drift);
    min_grid = std::min(min_grid, r.grid_min);
    rows.push_back({{"fiber", r.fiber},
                    {"eps", r.eps},
                    {"pullback_depth", r.pullback_depth},
                    {"cauchy_defect", r.cauchy_defect},
                    {"converged", r.converged}});
  }
  ctx.save("density.csv", coeffs);
  ctx.save("density_summary.csv", summary);
  ctx.save("density_defects.csv", defects);
  ctx.summary["densities"] = rows;
  ctx.summary["all_converged"] = all_converged;
  ctx.summary["max_defect"] = max_defect;
  ctx.summary["max_mass_drift"] = max_drift;
  ctx.summary["min_grid_value"] = min_grid;
}

void run_stability(Context& ctx) {
  const auto fibers = int_list(ctx.cfg.params.at("fibers"));
  const int ell = ctx.cfg.params.at("ell").get<int>();
  Table table({"fiber", "eps", "error"});
  PlotData plot("log|eps| log(error)");
  json per = json::array();
  double worst_exp = HUGE_VAL, worst_r2 = HUGE_VAL;
  for (int fiber : fibers) {
    const auto fit = stability_rate(ctx.driving(), fiber, ctx.cfg.eps_grid, ell, ctx.disc, ctx.density_options(),
                                    ctx.threads);
    plot.block(fmt::format("fiber {}", fiber));
    for (std::size_t i = 0; i < fit.eps_list.size(); ++i) {
      table.row(fiber, fit.eps_list[i], fit.errors[i]);
      if (fit.errors[i] > 0.0) plot.point(std::log(std::abs(fit.eps_list[i])), std::log(fit.errors[i]));
    }
    if (fit.refused) ctx.flag(fmt::format("stability fiber={} refused: {}", fiber, fit.reason));
    json j = rate_json(fit);
    j["fiber"] = fiber;
    per.push_back(j);
    if (!fit.exact) {
      worst_exp = std::min(worst_exp, fit.fitted_exponent);
      worst_r2 = std::min(worst_r2, fit.r_squared);
    }
  }
  ctx.save("stability.csv", table);
  ctx.save("stability.dat", plot);
  ctx.summary["ell"] = ell;
  ctx.summary["fibers"] = per;
  ctx.summary["fitted_exponent"] = std::isfinite(worst_exp) ? json(worst_exp) : json(nullptr);
  ctx.summary["r_squared"] = std::isfinite(worst_r2) ? json(worst_r2) : json(nullptr);
}

/// Closed-form series for a constant D_eps-composed orbit: h_hat_k = sum_n psi_{d^n k}.
std::optional<FourierFunction> closed_form_h_hat(const ExperimentConfig& cfg) {
  if (cfg.maps.size() != 1) return std::nullopt;
  const json& spec = cfg.maps.begin().value();
  if (spec.at("family") != "doubling_composed") return std::nullopt;
  const json& p = spec.at("params");
  const json terms = p.contains("psi") ? p.at("psi") : cos_terms();
  const int d = p.value("degree", 2);
  int K = 1;
  for (const auto& t : terms) K = std::max(K, t.at("freq").get<int>());
  const auto psi = terms_function(terms, K);
  std::vector<cplx> c(static_cast<std::size_t>(2 * cfg.M + 1));
  for (int k = 1; k <= cfg.M; ++k) {
    cplx s{};
    for (long long m = k; m <= K; m *= d) s += psi.coeff(static_cast<int>(m));
    c[static_cast<std::size_t>(cfg.M + k)] = s;
    c[static_cast<std::size_t>(cfg.M - k)] = std::conj(s);
  }
  return FourierFunction(cfg.M, std::move(c));
}

void run_response(Context& ctx) {
  const json& p = ctx.cfg.params;
  const auto fibers = int_list(p.at("fibers"));
  const int M = ctx.cfg.M;
  const auto phi = terms_function(p.at("observable"), M);
  ResponseOptions ropt;
  ropt.N = p.at("N").get<int>();
  ropt.term_tol = p.at("term_tol").get<double>();
  ropt.max_terms = p.at("max_terms").get<int>();
  ropt.observable = phi;
  ropt.density = ctx.density_options();

  std::vector<ResponseResult> series(fibers.size());
  std::vector<KoopmanResult> koop(fibers.size());
  parallel_for(static_cast<int>(fibers.size()), ctx.threads, [&](int i) {
    const auto u = static_cast<std::size_t>(i);
    series[u] = response_series(ctx.driving(), fibers[u], ctx.disc, ropt);
    koop[u] = koopman_observable_response(ctx.driving(), series[u], phi);
  });

  Table hhat({"fiber", "k", "re", "im"});
  Table terms({"fiber", "n", "term_norm"});
  Table val({"fiber", "eps", "error"});
  PlotData plot("log|eps| log(error)");
  json per = json::array();
  double worst = HUGE_VAL;
  for (std::size_t u = 0; u < fibers.size(); ++u) {
    const auto& r = series[u];
    for (int k = -M; k <= M; ++k) hhat.row(r.fiber, k, r.h_hat.coeff(k).real(), r.h_hat.coeff(k).imag());
    for (std::size_t n = 0; n < r.term_norms.size(); ++n) terms.row(r.fiber, static_cast<int>(n), r.term_norms[n]);
    const auto v = response_validation(ctx.driving(), r.fiber, ctx.cfg.eps_grid, r, ctx.disc, ctx.density_options(),
                                       phi, ctx.threads);
    plot.block(fmt::format("fiber {}", r.fiber));
    for (std::size_t i = 0; i < v.fit.eps_list.size(); ++i) {
      val.row(r.fiber, v.fit.eps_list[i], v.fit.errors[i]);
      if (v.fit.errors[i] > 0.0) plot.point(std::log(std::abs(v.fit.eps_list[i])), std::log(v.fit.errors[i]));
    }
    const double mean = r.h_hat.mean();
    if (std::abs(mean) > 1e-9) ctx.flag(fmt::format("response fiber={} mean(h_hat) = {}", r.fiber, cell(mean)));
    if (!r.densities_converged) ctx.flag(fmt::format("response fiber={} densities did not converge", r.fiber));
    if (v.fit.refused) ctx.flag(fmt::format("response fiber={} validation refused: {}", r.fiber, v.fit.reason));
    const bool koop_match = std::abs(koop[u].value - r.observable_response) <= 1e-8;
    if (!koop_match) ctx.flag(fmt::format("response fiber={} Koopman and series observables disagree", r.fiber));
    json j = rate_json(v.fit);
    j.update({{"fiber", r.fiber},
              {"series_depth", r.series_depth},
              {"tail_estimate", std::isfinite(r.tail_estimate) ? json(r.tail_estimate) : json(nullptr)},
              {"decay_factor", r.decay_factor},
              {"mean_h_hat", mean},
              {"densities_converged", r.densities_converged},
              {"observable_series", r.observable_response},
              {"observable_koopman", koop[u].value},
              {"koopman_resolved", koop[u].resolved},
              {"koopman_modes", koop[u].modes},
              {"observable_fd", v.observable_fd},
              {"koopman_match", koop_match}});
    per.push_back(j);
    if (!v.fit.exact) worst = std::min(worst, v.fit.fitted_exponent);
  }
  ctx.save("response_h_hat.csv", hhat);
  ctx.save("response_terms.csv", terms);
  ctx.save("response_validation.csv", val);
  ctx.save("response_validation.dat", plot);
  ctx.summary["fibers"] = per;
  ctx.summary["fitted_exponent"] = std::isfinite(worst) ? json(worst) : json(nullptr);

  if (p.at("taylor").get<bool>()) {
    const int src = fibers.front() - 1;
    const auto h = equivariant_density(ctx.driving(), 0.0, src, ctx.disc, ctx.density_options());
    const auto fit = taylor_check(ctx.driving().fiber(src), h.h, ctx.cfg.eps_grid, ctx.disc);
    Table t({"eps", "error"});
    for (std::size_t i = 0; i < fit.eps_list.size(); ++i) t.row(fit.eps_list[i], fit.errors[i]);
    ctx.save("taylor.csv", t);
    ctx.summary["taylor"] = rate_json(fit);
    ctx.summary["taylor_exponent"] = fit.fitted_exponent;
  }

  if (const auto closed = closed_form_h_hat(ctx.cfg)) {
    double err = 0.0;
    for (const auto& r : series) {
      for (int k = -M; k <= M; ++k) err = std::max(err, std::abs(r.h_hat.coeff(k) - closed->coeff(k)));
    }
    ctx.summary["closed_form_available"] = true;
    ctx.summary["closed_form_error"] = err;
    ctx.summary["closed_form_match"] = err <= 1e-8;
    if (err > 1e-8) ctx.flag(fmt::format("response h_hat differs from the closed form by {}", cell(err)));
  } else {
    ctx.summary["closed_form_available"] = false;
  }
}

void run_ly_check(Context& ctx) {
  const json& p = ctx.cfg.params;
  const auto ells = int_list(p.at("ells"));
  LYOptions opt;
  opt.trials = p.at("trials").get<int>();
  opt.M = ctx.cfg.M;
  opt.Q = ctx.cfg.Q;
  opt.seed = p.at("seed").get<std::uint64_t>();
  opt.variant = p.at("variant") == "paper" ? GVariant::Paper : GVariant::Corrected;
  const double eps = p.at("eps").get<double>();
  std::vector<LYReport> reps(ells.size());
  parallel_for(static_cast<int>(ells.size()), ctx.threads, [&](int i) {
    reps[static_cast<std::size_t>(i)] = ly_constants(ctx.driving(), eps, ells[static_cast<std::size_t>(i)], opt);
  });
  Table t({"ell", "fiber", "lambda", "K", "C", "B", "contraction", "empirical_C", "empirical_B",
           "empirical_contraction", "holds"});
  json per = json::array();
  bool all = true;
  for (const auto& r : reps) {
    for (const auto& f : r.fibers) {
      t.row(r.ell, f.fiber, f.lambda, f.K, f.C, f.B, f.contraction, f.empirical_C, f.empirical_B,
            f.empirical_contraction, f.holds);
      if (!f.holds) ctx.flag(fmt::format("ly ell={} fiber={} empirical norm exceeds the symbolic bound", r.ell, f.fiber));
    }
    per.push_back({{"ell", r.ell}, {"all_hold", r.all_hold()}});
    all = all && r.all_hold();
  }
  ctx.save("ly.csv", t);
  ctx.summary["variant"] = to_string(opt.variant);
  ctx.summary["ells"] = per;
  ctx.summary["all_hold"] = all;
}

void run_crim_check(Context& ctx) {
  const json& p = ctx.cfg.params;
  const auto ells = int_list(p.at("ells"));
  const int M = ctx.cfg.M;
  const auto f = terms_function(p.at("test"), M) + FourierFunction::constant(M, 1.0);
  const auto& map = ctx.driving().fiber(p.at("fiber").get<int>());
  const double eps = p.at("eps").get<double>();
  std::vector<VariantSelection> sel(ells.size());
  parallel_for(static_cast<int>(ells.size()), ctx.threads, [&](int i) {
    sel[static_cast<std::size_t>(i)] = select_variant(map, eps, ells[static_cast<std::size_t>(i)], f, ctx.cfg.Q);
  });
  Table t({"ell", "residual_paper", "residual_corrected", "selected", "resolved"});
  json per = json::array();
  for (std::size_t i = 0; i < ells.size(); ++i) {
    const auto& s = sel[i];
    t.row(ells[i], s.residual_paper, s.residual_corrected, std::string(to_string(s.variant)), s.resolved);
    if (!s.resolved) ctx.flag(fmt::format("crim ell={} no G variant meets the tolerance", ells[i]));
    per.push_back({{"ell", ells[i]},
                   {"residual_paper", s.residual_paper},
                   {"residual_corrected", s.residual_corrected},
                   {"selected", to_string(s.variant)},
                   {"resolved", s.resolved}});
  }
  ctx.save("crim.csv", t);

  const int max_ell = *std::max_element(ells.begin(), ells.end());
  std::string text;
  std::size_t lines = 0;
  for (GVariant v : {GVariant::Corrected, GVariant::Paper}) {
    for (int ell = 0; ell <= max_ell; ++ell) {
      const auto G = g_polynomials(ell, v);
      for (std::size_t j = 0; j < G.size(); ++j) {
        text += fmt::format("{} G[{}][{}] = {}\n", to_string(v), ell, j, G[j].to_string());
        ++lines;
      }
    }
  }
  ctx.save("g_polynomials.txt", text, lines);

  const auto x = [](int i) { return FormalPolynomial::variable(i); };
  const auto example = formal_derivative(x(1) * x(3) - x(2) * x(2));
  const auto expected = x(1) * x(4) - x(2) * x(3);
  ctx.summary["ells"] = per;
  ctx.summary["example_derivative"] = example.to_string();
  ctx.summary["example_derivative_match"] = example == expected;
  if (!(example == expected)) ctx.flag("crim example derivative mismatch");
}

void run_counterexample(Context& ctx) {
  const json& p = ctx.cfg.params;
  const double delta = p.at("delta").get<double>();
  const auto seed = p.at("seed").get<std::uint64_t>();
  std::vector<std::size_t> sizes;
  for (const auto& v : p.at("sample_sizes")) sizes.push_back(v.get<std::size_t>());
  std::vector<std::uint64_t> caps;
  for (const auto& v : p.at("caps")) caps.push_back(v.get<std::uint64_t>());
  std::sort(sizes.begin(), sizes.end());
  std::sort(caps.begin(), caps.end());

  const auto rep = annealed_divergence_experiment(seed, delta, sizes, caps, ctx.threads);
  Table t({"sample_size", "cap", "truncated_mean", "fitted_slope", "max_sample"});
  Table ex({"kind", "sample_size", "cap", "truncated_mean", "exact_mean"});
  PlotData plot("log(cap) log(truncated_mean)");
  plot.block("samples");
  for (const auto& r : rep.rows) {
    t.row(r.sample_size, r.cap, r.truncated_mean, r.fitted_slope, r.max_sample);
    ex.row(r.kind, r.sample_size, r.cap, r.truncated_mean, r.exact_mean);
    if (r.kind == "cap") plot.point(std::log(static_cast<double>(r.cap)), safe_log(r.truncated_mean));
  }
  plot.block("exact");
  for (const auto& r : rep.rows) {
    if (r.kind == "cap") plot.point(std::log(static_cast<double>(r.cap)), safe_log(r.exact_mean));
  }
  ctx.save("divergence.csv", t);
  ctx.save("divergence_exact.csv", ex);
  ctx.save("divergence.dat", plot);
  ctx.summary["delta"] = delta;
  ctx.summary["fitted_slope"] = rep.fitted_slope;
  ctx.summary["expected_slope"] = 1.0 - delta;
  ctx.summary["power_r2"] = rep.power_r2;
  ctx.summary["log_r2"] = rep.log_r2;
  ctx.summary["increasing_in_cap"] = rep.increasing_in_cap;
  ctx.summary["max_sample"] = rep.max_sample;
  ctx.summary["capped_samples"] = rep.capped_samples;

  const auto nq = p.at("quenched_samples").get<std::size_t>();
  if (nq > 0) {
    const int M = p.at("quenched_M").get<int>();
    const auto psi = make_psi(p.at("interval")[0].get<double>(), p.at("interval")[1].get<double>(), M);
    const auto states = sample_suspension(derive_seed(seed, 0x71), delta, nq, ctx.threads);
    std::vector<QuenchedValue> closed(nq), op(nq);
    parallel_for(static_cast<int>(nq), ctx.threads, [&](int i) {
      const auto u = static_cast<std::size_t>(i);
      closed[u] = quenched_response_value(states[u], ResponseRoute::ClosedForm, psi, delta, M);
      op[u] = quenched_response_value(states[u], ResponseRoute::Operator, psi, delta, M);
    });
    Table q({"sample", "omega0", "i", "closed_form", "operator", "abs_diff"});
    double worst = 0.0;
    for (std::size_t u = 0; u < nq; ++u) {
      const double diff = std::abs(closed[u].value - op[u].value);
      worst = std::max(worst, diff);
      q.row(u, states[u].omega0, states[u].i, closed[u].value, op[u].value, diff);
    }
    ctx.save("quenched.csv", q);
    ctx.summary["quenched_max_abs_diff"] = worst;
  }
}

void run_lyapunov(Context& ctx) {
  const json& p = ctx.cfg.params;
  const double eps = p.at("eps").get<double>();
  const int ell = p.at("ell").get<int>();
  const int start = p.at("start").get<int>();
  const auto exp = expansion_report(ctx.driving(), eps);
  const auto ly = lyapunov_top(ctx.driving(), eps, start, ell, p.at("n_max").get<int>(), p.at("trials").get<int>(),
                               ctx.disc);
  const auto dec = decay_rate(ctx.driving(), eps, start, ell, p.at("decay_n").get<int>(),
                              p.at("decay_tests").get<int>(), ctx.disc);
  Table t({"n", "log_norm"});
  PlotData plot("n log(norm)");
  plot.block("top");
  for (std::size_t n = 0; n < ly.log_norms.size(); ++n) {
    t.row(static_cast<int>(n + 1), ly.log_norms[n]);
    plot.point(static_cast<double>(n + 1), ly.log_norms[n]);
  }
  Table d({"test", "n", "norm"});
  for (std::size_t k = 0; k < dec.norms.size(); ++k) {
    for (std::size_t n = 0; n < dec.norms[k].size(); ++n) d.row(static_cast<int>(k), static_cast<int>(n), dec.norms[k][n]);
  }
  ctx.save("lyapunov.csv", t);
  ctx.save("lyapunov.dat", plot);
  ctx.save("decay.csv", d);
  ctx.summary["exponent"] = ly.exponent;
  ctx.summary["r_squared"] = ly.r_squared;
  ctx.summary["mean_log_lambda"] = exp.mean_log_lambda;
  ctx.summary["expanding_on_average"] = exp.expanding_on_average;
  ctx.summary["lambda_hat"] = dec.lambda_hat;
  ctx.summary["K_hat"] = dec.K_hat;
  ctx.summary["decay_rates"] = dec.rates;
  if (!exp.expanding_on_average) ctx.flag("lyapunov: cocycle is not expanding on average");
}

}  // namespace

namespace {

// Worst conservation and positivity figures over everything a run computes.
class RunAudit {
 public:
  RunAudit() {
    prev_density_ = set_density_observer([this](const DensityResult& r) {
      {
        std::lock_guard lock(mu_);
        ++densities_;
        mass_ = std::max({mass_, std::abs(r.h.mean() - 1.0), r.mass_drift});
        grid_min_ = std::min(grid_min_, r.grid_min);
      }
      if (prev_density_) prev_density_(r);
    });
    prev_response_ = set_response_observer([this](const ResponseResult& r) {
      {
        std::lock_guard lock(mu_);
        ++responses_;
        mean_ = std::max(mean_, std::abs(r.h_hat.mean()));
      }
      if (prev_response_) prev_response_(r);
    });
  }
  ~RunAudit() {
    set_density_observer(std::move(prev_density_));
    set_response_observer(std::move(prev_response_));
  }
  RunAudit(const RunAudit&) = delete;
  RunAudit& operator=(const RunAudit&) = delete;

  json report() const {
    std::lock_guard lock(mu_);
    json j = {{"densities", densities_}, {"responses", responses_}};
    j["max_mass_error"] = densities_ ? json(mass_) : json(nullptr);
    j["min_grid_value"] = densities_ ? json(grid_min_) : json(nullptr);
    j["max_abs_mean_h_hat"] = responses_ ? json(mean_) : json(nullptr);
    j["ok"] = mass_ <= 1e-9 && grid_min_ > -1e-6 && mean_ <= 1e-9;
    return j;
  }

 private:
  mutable std::mutex mu_;
  long densities_ = 0, responses_ = 0;
  double mass_ = 0.0, grid_min_ = std::numeric_limits<double>::infinity(), mean_ = 0.0;
  DensityObserver prev_density_;
  ResponseObserver prev_response_;
};

}  // namespace

RunRecord run_config(const json& config, const RunOptions& opt, std::string_view source_text) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.tool_version = tool_version();
  rec.inputs_digest = git_blob_id(source_text.empty() ? std::string_view(config.dump()) : source_text);
  Context ctx;
  try {
    Checker ck(source_text);
    parse_into(ck, config, ctx.cfg);
    Built built;
    if (ck.ok() && needs_cocycle(ctx.cfg.experiment)) built = build_cocycle(ck, ctx.cfg);
    if (ck.ok()) check_params(ck, ctx.cfg, built);
    if (!ck.ok()) {
      const auto& d = ck.diagnostics().front();
      throw ConfigError(d.field, d.message);
    }
    if (opt.output) ctx.cfg.output = *opt.output;
    ctx.threads = opt.threads > 0 ? opt.threads : (ctx.cfg.threads > 0 ? ctx.cfg.threads : default_threads());
    ctx.registry = built.registry;
    ctx.orbit = built.orbit;
    ctx.disc.M = ctx.cfg.M;
    ctx.disc.Q = ctx.cfg.Q;
    json hashed = ctx.cfg.to_json();
    hashed.erase("output");
    hashed.erase("threads");
    rec.config_sha256 = sha256_hex(hashed.dump());
    ctx.out = ctx.cfg.output;
    fs::create_directories(ctx.out);

    const auto& tag = ctx.cfg.experiment;
    RunAudit audit;
    if (tag == "density") run_density(ctx);
    else if (tag == "stability") run_stability(ctx);
    else if (tag == "response") run_response(ctx);
    else if (tag == "ly_check") run_ly_check(ctx);
    else if (tag == "crim_check") run_crim_check(ctx);
    else if (tag == "counterexample") run_counterexample(ctx);
    else if (tag == "lyapunov") run_lyapunov(ctx);

    const json conservation = audit.report();
    if (!conservation["ok"].get<bool>()) ctx.flag("conservation or positivity violated");
    json summary = {{"experiment", tag}, {"config_sha256", rec.config_sha256}, {"flags", ctx.flags}};
    summary["conservation"] = conservation;
    summary.update(ctx.summary);
    ctx.save("summary.json", summary.dump(2) + "\n", 1);
    rec.summary = std::move(summary);
    rec.exit_code = ctx.flags.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    rec.exit_code = 2;
    rec.error = e.what();
  }
  rec.flags = ctx.flags;
  rec.outputs = ctx.outputs;
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!ctx.out.empty() && fs::exists(ctx.out)) {
    std::ofstream f(ctx.out / "run_record.json", std::ios::binary | std::ios::trunc);
    f << rec.to_json().dump(2) << "\n";
  }
  return rec;
}

RunRecord run_config_file(const std::string& path, const RunOptions& opt) {
  RunRecord rec;
  rec.tool_version = tool_version();
  std::string text;
  try {
    text = read_file(path);
  } catch (const ConfigError& e) {
    rec.exit_code = 2;
    rec.error = e.what();
    return rec;
  }
  ValidationResult vr;
  const auto cfg = parse_text(text, vr);
  if (!cfg) {
    rec.exit_code = 2;
    rec.error = vr.diagnostics.front().message;
    return rec;
  }
  return run_config(*cfg, opt, text);
}

}  // namespace qresp
