#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qresp/error.hpp"
#include "qresp/harness.hpp"

using namespace qresp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json stability_config() {
  return json::parse(R"({
    "experiment": "stability",
    "cocycle": {"family": "additive", "params": {"base": [{"amp": 0.05, "freq": 1}],
                                                 "perturbation": [{"amp": 0.5, "freq": 1}], "eps_max": 0.125}},
    "eps_grid": [0.125, 0.0625, 0.03125],
    "output": "unused"
  })");
}

bool has_field(const ValidationResult& v, const std::string& field) {
  for (const auto& d : v.diagnostics)
    if (d.field == field) return true;
  return false;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qresp_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("experiment tags") {
  const auto& tags = experiment_tags();
  for (const char* t : {"density", "stability", "response", "ly_check", "crim_check", "counterexample", "lyapunov"})
    CHECK(std::find(tags.begin(), tags.end(), t) != tags.end());
}

TEST_CASE("a valid config resolves its defaults") {
  const auto v = validate_config(stability_config());
  REQUIRE(v.ok);
  CHECK(v.resolved["discretization"]["M"] == 32);
  CHECK(v.resolved["params"]["ell"] == 1);
  CHECK(v.resolved["driving"]["family"] == "fixed");
  const auto cfg = parse_config(stability_config());
  CHECK(cfg.eps_grid.size() == 3);
  CHECK(cfg.maps.contains("A"));
}

TEST_CASE("diagnostics name the offending field") {
  auto c = stability_config();
  c.erase("eps_grid");
  CHECK(has_field(validate_config(c), "eps_grid"));
  CHECK_THROWS_AS(parse_config(c), ConfigError);

  c = stability_config();
  c["eps_grid"] = {0.0625, 0.125, 0.03125};
  CHECK(has_field(validate_config(c), "eps_grid[1]"));

  c = stability_config();
  c["discretization"] = {{"M", 16}, {"Q", 20}};
  CHECK(has_field(validate_config(c), "discretization.Q"));

  c = stability_config();
  c["colour"] = "blue";
  CHECK(has_field(validate_config(c), "colour"));

  c = stability_config();
  c["experiment"] = "spectrum";
  CHECK(has_field(validate_config(c), "experiment"));

  c = stability_config();
  c["cocycle"]["family"] = "tent";
  CHECK_FALSE(validate_config(c).ok);

  c = stability_config();
  c["params"] = {{"ell", "one"}};
  CHECK(has_field(validate_config(c), "params.ell"));
}

TEST_CASE("inadmissible eps cites min |T'|") {
  auto c = stability_config();
  c["eps_grid"] = {0.5, 0.25, 0.125};
  const auto v = validate_config(c);
  REQUIRE_FALSE(v.ok);
  CHECK(v.diagnostics[0].field == "eps_grid[0]");
  CHECK(v.diagnostics[0].message.find("min|T'|") != std::string::npos);
  CHECK(v.diagnostics[0].message.find("0.125") != std::string::npos);
}

TEST_CASE("line numbers and parse errors") {
  const auto dir = scratch("lines");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "bad.json");
    f << "{\n  \"experiment\": \"density\",\n  \"discretization\": {\"M\": -3},\n  \"cocycle\": {\"family\": \"doubling\"},\n"
         "  \"output\": \"x\"\n}\n";
  }
  const auto v = validate_file((dir / "bad.json").string());
  REQUIRE_FALSE(v.ok);
  CHECK(v.diagnostics[0].field == "discretization.M");
  CHECK(v.diagnostics[0].line == 3);
  {
    std::ofstream f(dir / "broken.json");
    f << "{\n  \"experiment\": \"density\",\n  oops\n}\n";
  }
  const auto b = validate_file((dir / "broken.json").string());
  REQUIRE_FALSE(b.ok);
  CHECK(b.diagnostics[0].line == 3);
  CHECK_FALSE(validate_file((dir / "missing.json").string()).ok);
}

TEST_CASE("hash helpers and number formatting") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(git_blob_id("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-0.0) == "0");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(std::string(tool_version()).rfind("qresp ", 0) == 0);
}

TEST_CASE("runs are deterministic across thread counts") {
  const auto cfg = json::parse(R"({
    "experiment": "density",
    "cocycle": {"maps": {"A": {"family": "additive", "params": {"base": [{"amp": 0.05, "freq": 1}]}},
                         "B": {"family": "doubling", "params": {"degree": 3}}}},
    "driving": {"family": "iid", "seed": 4, "window": 48, "params": {"symbols": ["A", "B"], "p": [0.5, 0.5]}},
    "discretization": {"M": 16, "tol": 1e-11},
    "eps_grid": [0.0],
    "params": {"fibers": [-1, 0, 2]},
    "output": "unused"
  })");
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ra = run_config(cfg, {a.string(), 1});
  const auto rb = run_config(cfg, {b.string(), 4});
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  CHECK(ra.config_sha256 == rb.config_sha256);
  REQUIRE(ra.outputs.size() == rb.outputs.size());
  for (std::size_t i = 0; i < ra.outputs.size(); ++i) {
    CHECK(ra.outputs[i].sha256 == rb.outputs[i].sha256);
    CHECK(slurp(ra.outputs[i].path) == slurp(rb.outputs[i].path));
  }
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  CHECK(fs::exists(a / "run_record.json"));
  const auto rec = json::parse(slurp(a / "run_record.json"));
  CHECK(rec["config_sha256"] == ra.config_sha256);
}

TEST_CASE("failures are reported with exit code 2") {
  auto c = stability_config();
  c.erase("eps_grid");
  const auto r = run_config(c, {scratch("fail").string(), 1});
  CHECK(r.exit_code == 2);
  CHECK_FALSE(r.error.empty());
}
