// hdstat: command-line front end for the seeded experiments.
//
//   hdstat [--seed S] [--replicates R] [--jobs J] [--out DIR] [--config FILE]
//          <denoise|bias-variance|lasso|phase-diagram|clique> [-p key=value]...
//
// Exit codes: 0 success, 2 usage error, 1 I/O or numerical error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hdstat/hdstat.hpp"

namespace {

constexpr int kUsageExit = 2;
constexpr int kFailureExit = 1;

void print_parameters(hdstat::ExperimentKind kind) {
  for (const auto& spec : hdstat::parameter_schema(kind))
    std::cout << "  " << spec.name << " (default: "
              << (spec.default_value.empty() ? "<none>" : spec.default_value) << ")  " << spec.help
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse estimation, state evolution and planted clique experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates, jobs;
  std::optional<std::string> out_dir;
  std::string config_path;
  std::vector<std::string> overrides;
  bool list_params = false;
  bool no_plot = false;

  app.add_option("--seed", seed, "base seed; replicate r uses seed + r");
  app.add_option("--replicates", replicates, "number of Monte Carlo replicates")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "replicates run concurrently")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--config", config_path, "configuration file");
  app.add_option("-p,--param", overrides, "parameter override key=value (repeatable)");
  app.add_flag("--list-params", list_params, "print the experiment's parameters and exit");
  app.add_flag("--no-plot", no_plot, "skip SVG output");

  struct Sub {
    hdstat::ExperimentKind kind;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {hdstat::ExperimentKind::denoise, "thresholding denoisers on an orthogonal design"},
      {hdstat::ExperimentKind::bias_variance, "Fourier least-squares risk versus model size"},
      {hdstat::ExperimentKind::lasso_compare, "ISTA versus AMP on random Gaussian designs"},
      {hdstat::ExperimentKind::se_phase_diagram, "phase boundary delta = M(eps)"},
      {hdstat::ExperimentKind::clique_sweep, "planted clique recovery rates"},
  };
  std::string edges;
  std::size_t clique_k = 0;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(hdstat::command_name(s.kind), s.help);
    if (s.kind == hdstat::ExperimentKind::clique_sweep) {
      sub->add_option("--edges", edges, "edge-list file to search instead of random instances");
      sub->add_option("--k", clique_k, "clique size for --edges");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  hdstat::ExperimentKind kind{};
  for (const auto& s : subs)
    if (app.got_subcommand(hdstat::command_name(s.kind))) kind = s.kind;

  if (list_params) {
    std::cout << hdstat::command_name(kind) << " parameters:\n";
    print_parameters(kind);
    return 0;
  }

  try {
    const hdstat::ConfigFile file =
        config_path.empty() ? hdstat::ConfigFile{} : hdstat::ConfigFile::load(config_path);
    if (!edges.empty()) overrides.push_back("edges=" + edges);
    if (clique_k) overrides.push_back("k=" + std::to_string(clique_k));
    if (no_plot) overrides.push_back("plot=false");
    hdstat::RunConfig cfg =
        hdstat::make_run_config(kind, file, overrides, {seed, replicates, jobs, out_dir});

    const auto start = std::chrono::steady_clock::now();
    const hdstat::ExperimentOutput result = hdstat::run_experiment_tables(cfg);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& path : hdstat::write_outputs(cfg, result, elapsed))
      std::cout << "wrote " << path << '\n';
    if (result.failures)
      std::cout << result.failures << " replicate(s) failed; see the failures column\n";
    return 0;
  } catch (const hdstat::InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageExit;
  } catch (const hdstat::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kFailureExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailureExit;
  }
}
