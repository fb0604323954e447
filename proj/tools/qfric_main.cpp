#include "qfric/cache.hpp"
#include "qfric/scenario.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

enum Exit { ok = 0, validation = 1, numerical = 2, io = 3 };

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const qfric::DomainError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return validation;
  } catch (const qfric::ConvergenceError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return numerical;
  } catch (const qfric::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vacuum excitation rates near a moving dielectric surface"};
  app.set_version_flag("--version", qfric::kVersion);
  app.require_subcommand(1);

  std::string scenario_path, output, format, cache_dir;
  unsigned workers = 0;
  bool no_cache = false;

  auto* run = app.add_subcommand("run", "Evaluate a scenario and write its results");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--output", output, "Output path (default stdout)");
  run->add_option("--format", format, "csv or json (default from --output extension, else csv)")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--workers", workers, "Worker threads for sweep points (0 = all cores)");
  run->add_option("--cache-dir", cache_dir, "Result cache directory (default $QFRIC_CACHE_DIR)");
  run->add_flag("--no-cache", no_cache, "Ignore any configured cache");

  auto* validate = app.add_subcommand("validate", "Check a scenario file without computing");
  validate->add_option("--scenario", scenario_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : validation;
  }

  if (validate->parsed()) {
    return guarded([&] {
      const auto s = qfric::load_scenario_file(scenario_path);
      std::cout << "ok: " << qfric::to_string(s.kind) << " scenario, key " << qfric::cache_key(s) << '\n';
      return ok;
    });
  }

  return guarded([&] {
    const auto s = qfric::load_scenario_file(scenario_path);
    qfric::OutputFormat fmt = qfric::OutputFormat::csv;
    if (format == "json" || (format.empty() && output.size() >= 5 && output.ends_with(".json")))
      fmt = qfric::OutputFormat::json;

    qfric::RunOptions opts;
    opts.workers = workers;
    auto compute = [&] { return qfric::run_scenario(s, opts); };

    std::optional<std::string> dir;
    if (!no_cache) dir = cache_dir.empty() ? qfric::default_cache_dir() : std::optional(cache_dir);
    qfric::ResultRecord rec;
    if (dir) {
      auto got = qfric::cache_lookup_or_compute(s, *dir, compute);
      for (const auto& w : got.warnings) std::cerr << "warning: " << w << '\n';
      if (got.hit) std::cerr << "cache hit: " << qfric::cache_key(s) << '\n';
      rec = std::move(got.record);
    } else {
      rec = compute();
    }
    qfric::emit_results(rec, fmt, output);
    for (const auto& d : rec.diagnostics) std::cerr << "diagnostic: " << d << '\n';
    return rec.converged ? ok : numerical;
  });
}
