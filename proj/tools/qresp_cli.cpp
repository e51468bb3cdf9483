#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "qresp/harness.hpp"
#include "qresp/maps.hpp"

namespace {

void print_diagnostics(const std::string& path, const qresp::ValidationResult& r) {
  for (const auto& d : r.diagnostics) {
    if (d.line > 0) {
      fmt::print(stderr, "{}:{}: {}: {}\n", path, d.line, d.field, d.message);
    } else {
      fmt::print(stderr, "{}: {}: {}\n", path, d.field, d.message);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quenched linear response experiments for random expanding circle maps"};
  app.set_version_flag("--version", std::string(qresp::tool_version()));
  app.require_subcommand(1);

  std::string config;
  std::string output;
  int threads = 0;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output, "Output directory (overrides the config)");
  run->add_option("-j,--threads", threads, "Worker threads (default: config, then QRESP_THREADS, then 1)")
      ->check(CLI::Range(1, 1024));
  run->add_flag("-q,--quiet", quiet, "Do not print the summary");

  auto* validate = app.add_subcommand("validate", "Check a config file without running it");
  validate->add_option("config", config, "JSON config file")->required();

  auto* families = app.add_subcommand("list-families", "List the built-in map families");

  CLI11_PARSE(app, argc, argv);

  if (families->parsed()) {
    for (const auto& f : qresp::list_families()) fmt::print("{:<18} {}\n", f.name, f.description);
    return 0;
  }

  if (validate->parsed()) {
    const auto r = qresp::validate_file(config);
    if (!r.ok) {
      print_diagnostics(config, r);
      return 2;
    }
    fmt::print("ok\n{}\n", r.resolved.dump(2));
    return 0;
  }

  qresp::RunOptions opt;
  if (!output.empty()) opt.output = output;
  opt.threads = threads;
  const auto r = qresp::validate_file(config);
  if (!r.ok) {
    print_diagnostics(config, r);
    return 2;
  }
  const auto rec = qresp::run_config_file(config, opt);
  if (rec.exit_code == 2) {
    fmt::print(stderr, "{}: run failed: {}\n", config, rec.error);
    return 2;
  }
  for (const auto& f : rec.flags) fmt::print(stderr, "flag: {}\n", f);
  if (!quiet) {
    fmt::print("{}\n", rec.summary.dump(2));
    for (const auto& o : rec.outputs) fmt::print("wrote {} ({} rows)\n", o.path, o.rows);
    fmt::print("wall time {:.2f} s\n", rec.wall_time);
  }
  return rec.exit_code;
}
