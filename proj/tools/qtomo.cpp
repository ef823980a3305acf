// qtomo: simulated polarization tomography campaigns from the command line.
//
//   qtomo simulate  <config> --out <dir> [--jobs N] [--save-counts]
//   qtomo precision <config> --out <dir>
//   qtomo optimize  <config> --out <dir> [--jobs N]
//   qtomo reduce    <config>
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//
// Seeds: run i uses base_seed XOR (i * 0x9E3779B97F4A7C15) for its Poisson
// counts and that value XOR 0xD1B54A32D192ED03 for its reconstruction starts.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qtomo/campaign.hpp"
#include "qtomo/io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

int cmd_simulate(const fs::path& config, const fs::path& out, int jobs, bool save_counts) {
  const auto cfg = qtomo::load_config(config);
  const auto report = qtomo::run_campaign(cfg, jobs);
  qtomo::io::write_campaign(out, report, qtomo::exposed_protocol(cfg));
  if (save_counts) {
    const auto sc = qtomo::build_scenario(cfg);
    fs::create_directories(out / "counts");
    for (int i = 0; i < cfg.runs; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "run_%04d.csv", i);
      auto os = qtomo::io::open_output(out / "counts" / name);
      qtomo::io::write_counts_csv(os, qtomo::run_counts(cfg, sc, i));
    }
  }
  const auto& a = report.aggregates;
  std::cout << report.protocol_name << ": " << report.runs.size() << " runs, mean F = " << qtomo::io::fmt(a.mean_fidelity)
            << ", empirical L = " << qtomo::io::fmt(a.empirical_L);
  if (auto l = report.theoretical_L()) std::cout << ", theoretical L = " << qtomo::io::fmt(*l);
  std::cout << '\n';
  return 0;
}

int cmd_precision(const fs::path& config, const fs::path& out) {
  const auto cfg = qtomo::load_config(config);
  const auto sc = qtomo::build_scenario(cfg);
  if (sc.model_rank != sc.true_rank)
    throw qtomo::ConfigError("precision needs rank equal to the true state's rank (" + std::to_string(sc.true_rank) + ")");
  const auto model = qtomo::loss_model(sc.protocol, sc.truth_amplitude);
  fs::create_directories(out);
  nlohmann::ordered_json j;
  j["generator"] = std::string("qtomo ") + QTOMO_VERSION;
  j["config"] = qtomo::io::config_json(cfg);
  j["protocol"] = sc.protocol.name();
  j["loss_model"] = qtomo::io::loss_model_json(model, sc.protocol.dim(), sc.model_rank);
  qtomo::io::open_output(out / "precision.json") << j.dump(2) << '\n';
  {
    auto os = qtomo::io::open_output(out / "hist_theory.csv");
    qtomo::io::write_hist_theory(
        os, qtomo::theory_density(model, cfg.theory_samples, cfg.theory_grid, qtomo::theory_seed(cfg.base_seed)));
  }
  {
    auto os = qtomo::io::open_output(out / "protocol.txt");
    qtomo::write_protocol(os, sc.protocol);
  }
  std::cout << sc.protocol.name() << ": nu = " << model.nu << ", L = " << qtomo::io::fmt(model.loss_functional())
            << ", mean F = " << qtomo::io::fmt(1.0 - model.mean_loss()) << '\n';
  return 0;
}

int cmd_optimize(const fs::path& config, const fs::path& out, int jobs) {
  const auto cfg = qtomo::load_config(config);
  const auto protocol = qtomo::build_protocol(cfg);
  auto settings = cfg.optimizer;
  settings.jobs = jobs;
  const auto worst = qtomo::maximize_loss(protocol, cfg.n, settings);
  fs::create_directories(out);
  nlohmann::ordered_json j;
  j["generator"] = std::string("qtomo ") + QTOMO_VERSION;
  j["config"] = qtomo::io::config_json(cfg);
  j["protocol"] = protocol.name();
  j["L_max"] = worst.loss;
  j["L_min"] = qtomo::minimal_loss(protocol.dim());
  j["best_start"] = worst.start;
  j["evaluations"] = worst.evaluations;
  j["starts"] = settings.starts;
  j["max_evaluations"] = settings.max_evaluations;
  j["optimizer_seed"] = settings.seed;
  qtomo::io::open_output(out / "optimize.json") << j.dump(2) << '\n';
  {
    auto os = qtomo::io::open_output(out / "worst_state.txt");
    qtomo::write_amplitude(os, worst.state);
  }
  std::cout << protocol.name() << ": L_max = " << qtomo::io::fmt(worst.loss) << '\n';
  return 0;
}

int cmd_reduce(const fs::path& config) {
  auto cfg = qtomo::load_config(config);
  if (cfg.qubits != 3) throw qtomo::ConfigError("reduce needs qubits = 3");
  cfg.degenerate = true;
  qtomo::write_protocol(std::cout, qtomo::build_protocol(cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated polarization quantum tomography with maximum-likelihood reconstruction"};
  app.set_version_flag("--version", std::string("qtomo ") + QTOMO_VERSION);
  app.require_subcommand(1);

  std::string config;
  std::string out;
  int jobs = 1;

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo campaign: simulate, reconstruct, compare with theory");
  simulate->add_option("config", config, "Campaign config (key = value)")->required();
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  bool save_counts = false;
  simulate->add_flag("--save-counts", save_counts, "Also write each run's counts to counts/run_NNNN.csv");

  auto* precision = app.add_subcommand("precision", "Theoretical fidelity-loss law at the configured state");
  precision->add_option("config", config, "Campaign config (key = value)")->required();
  precision->add_option("--out", out, "Output directory")->required();

  auto* optimize = app.add_subcommand("optimize", "Worst-case loss search over pure states");
  optimize->add_option("config", config, "Campaign config (key = value)")->required();
  optimize->add_option("--out", out, "Output directory")->required();
  optimize->add_option("--jobs", jobs, "Concurrent starts")->check(CLI::PositiveNumber);

  auto* reduce = app.add_subcommand("reduce", "Print the protocol reduced to the symmetric subspace");
  reduce->add_option("config", config, "Campaign config (key = value)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(config, out, jobs, save_counts);
    if (*precision) return cmd_precision(config, out);
    if (*optimize) return cmd_optimize(config, out, jobs);
    if (*reduce) return cmd_reduce(config);
  } catch (const qtomo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  return 0;
}
