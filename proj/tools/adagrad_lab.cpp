// Command-line front end: run, sweep, estimate-noise, check, plot.
// Exit status: 0 when every configured check passes, 1 when one fails,
// 2 for configuration or usage errors, 3 for other runtime errors.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "adalab/config.hpp"
#include "adalab/harness.hpp"

namespace {

using namespace adalab;

int report(const std::vector<std::string>& failures) {
  if (failures.empty()) {
    std::cout << "all configured checks passed\n";
    return 0;
  }
  std::cout << failures.size() << " check(s) failed:\n";
  for (const auto& f : failures) std::cout << "  - " << f << "\n";
  return 1;
}

void print_rows(const std::vector<ResultRow>& rows) {
  for (const auto& r : rows)
    std::cout << r.method << " seed " << r.seed << " T " << r.T << ": final_f " << r.final_f << ", avg_grad_sq "
              << r.avg_grad_sq << (r.bound_rhs ? ", bound " + std::to_string(*r.bound_rhs) : std::string()) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdaGrad-with-momentum experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned jobs = 1;
  const auto common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "YAML experiment config");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "run every (method, seed) cell and its invariant checks");
  auto* sweep = app.add_subcommand("sweep", "run the T_grid and fit the log-log rate");
  auto* noise = app.add_subcommand("estimate-noise", "fit the noise envelope along an AdaGrad path");
  auto* check = app.add_subcommand("check", "re-run the invariant suite on stored trajectories");
  auto* plot = app.add_subcommand("plot", "charts and summary for a results directory");
  for (auto* sub : {run, sweep, noise, check}) common(sub, true);
  common(plot, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (plot->parsed()) {
      std::string dir;
      if (out) {
        dir = *out;
      } else if (!config_path.empty()) {
        dir = ExperimentConfig::load(config_path).out;
      } else {
        std::cerr << "plot needs --out <results dir> or --config\n";
        return 2;
      }
      const auto rep = emit_report(dir);
      for (const auto& f : rep.files) std::cout << "wrote " << f << "\n";
      std::cout << rep.summary;
      return 0;
    }

    const auto config = ExperimentConfig::load(config_path);
    HarnessOptions options;
    options.master_seed = seed;
    options.out = out;
    options.jobs = jobs;
    options.log = &std::cerr;

    if (run->parsed()) {
      const auto res = run_experiment(config, options);
      print_rows(res.rows);
      std::cout << "results in " << res.out_dir << "\n";
      return report(res.failures);
    }
    if (sweep->parsed()) {
      const auto res = sweep_rates(config, options);
      for (const auto& s : res.slopes)
        std::cout << s.method << ": slope " << (s.slope ? std::to_string(*s.slope) : std::string("n/a")) << "\n";
      for (const auto& e : res.excluded) std::cout << "excluded (diverged): " << e << "\n";
      std::cout << "results in " << res.out_dir << "\n";
      return report(res.failures);
    }
    if (noise->parsed()) {
      const auto res = estimate_noise_cmd(config, options);
      std::cout << res.protocol << "\n";
      std::cout << "A = " << res.fit.spec.A << ", B = " << res.fit.spec.B << ", C = " << res.fit.spec.C << "\n";
      std::cout << "results in " << res.out_dir << "\n";
      return report(res.failures);
    }
    if (check->parsed()) {
      const auto res = check_stored(config, options);
      return report(res.failures);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
