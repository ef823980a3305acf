#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qtomo/core.hpp"
#include "qtomo/degenerate.hpp"
#include "qtomo/estimation.hpp"
#include "qtomo/parallel.hpp"
#include "qtomo/precision.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/sampling.hpp"
#include "qtomo/states.hpp"
#include "qtomo/stats.hpp"

namespace qtomo {

/// Malformed or inconsistent campaign configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StateKind { ghz, w, ghz_mixture, file };

inline std::string to_string(StateKind kind) {
  switch (kind) {
    case StateKind::ghz: return "ghz";
    case StateKind::w: return "w";
    case StateKind::ghz_mixture: return "ghz_mixture";
    case StateKind::file: return "file";
  }
  return "?";
}

struct CampaignConfig {
  std::string protocol = "tetrahedron";
  int qubits = 3;
  bool degenerate = false;
  StateKind state = StateKind::ghz;
  double mixture_weight = 0.5;
  std::filesystem::path state_file;
  double n = 1e5;
  int runs = 200;
  /// Model rank; 0 means full rank (the state dimension).
  int rank = 1;
  std::uint64_t base_seed = 1;
  ReconstructionConfig reconstruction{.restarts = 3};
  int bins = 20;
  /// Use expected counts instead of Poisson draws.
  bool noiseless = false;
  std::size_t theory_samples = 1000000;
  int theory_grid = 200;
  OptimizerSettings optimizer;

  int dimension() const { return degenerate ? 4 : qubit_dimension(qubits); }
  int model_rank() const { return rank == 0 ? dimension() : rank; }

  void validate() const {
    if (protocol != "tetrahedron" && protocol != "cube" && protocol != "octahedron")
      throw ConfigError("protocol must be tetrahedron, cube or octahedron");
    if (qubits < 1 || qubits > 6) throw ConfigError("qubits must lie in [1, 6]");
    if (degenerate && qubits != 3) throw ConfigError("degenerate mode requires qubits = 3");
    if (!(n > 0.0)) throw ConfigError("n must be positive");
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (rank < 0 || model_rank() > dimension()) throw ConfigError("rank must lie in [1, dimension] or be 'full'");
    if (bins < 1) throw ConfigError("bins must be at least 1");
    if (theory_samples < 1 || theory_grid < 1) throw ConfigError("theory sampling sizes must be positive");
    if ((state == StateKind::ghz || state == StateKind::w) && qubits < 2)
      throw ConfigError("GHZ and W states need at least two qubits");
    if (state == StateKind::ghz_mixture) {
      if (!(mixture_weight >= 0.0 && mixture_weight <= 1.0)) throw ConfigError("mixture_weight must lie in [0, 1]");
      if (dimension() != 4 && dimension() != 8) throw ConfigError("ghz_mixture needs dimension 4 or 8");
    }
    if (state == StateKind::file && state_file.empty()) throw ConfigError("state = file requires state_file");
    try {
      reconstruction.validate(dimension());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (is.fail() || !is.eof()) throw ConfigError("invalid value for '" + key + "': '" + value + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + value + "'");
}

/// Parses "re", "re+imi" or "re-imi".
inline Complex parse_complex(const std::string& token) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double re = std::strtod(begin, &end);
  if (end == begin) throw std::invalid_argument("bad complex number '" + token + "'");
  if (*end == '\0') return {re, 0.0};
  const char* rest = end;
  const double im = std::strtod(rest, &end);
  if (end == rest || *end != 'i' || *(end + 1) != '\0') throw std::invalid_argument("bad complex number '" + token + "'");
  return {re, im};
}

}  // namespace detail

/**
 * Reads flat key = value text. '#' starts a comment; blank lines are ignored;
 * unknown keys are rejected. A relative state_file is resolved against `base_dir`.
 */
inline CampaignConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  CampaignConfig cfg;
  std::string line;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (seen[key]++) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    auto& rc = cfg.reconstruction;
    auto& opt = cfg.optimizer;
    using detail::parse_bool;
    using detail::parse_number;
    if (key == "protocol") cfg.protocol = value;
    else if (key == "qubits") cfg.qubits = parse_number<int>(key, value);
    else if (key == "degenerate") cfg.degenerate = parse_bool(key, value);
    else if (key == "state") {
      if (value == "ghz") cfg.state = StateKind::ghz;
      else if (value == "w") cfg.state = StateKind::w;
      else if (value == "ghz_mixture") cfg.state = StateKind::ghz_mixture;
      else if (value == "file") cfg.state = StateKind::file;
      else throw ConfigError("state must be ghz, w, ghz_mixture or file");
    } else if (key == "mixture_weight") cfg.mixture_weight = parse_number<double>(key, value);
    else if (key == "state_file") cfg.state_file = value.empty() ? std::filesystem::path{} : base_dir / value;
    else if (key == "n") cfg.n = parse_number<double>(key, value);
    else if (key == "runs") cfg.runs = parse_number<int>(key, value);
    else if (key == "rank") cfg.rank = value == "full" ? 0 : parse_number<int>(key, value);
    else if (key == "base_seed") cfg.base_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "tolerance") rc.tolerance = parse_number<double>(key, value);
    else if (key == "max_iterations") rc.max_iterations = parse_number<int>(key, value);
    else if (key == "restarts") rc.restarts = parse_number<int>(key, value);
    else if (key == "intensity_floor") rc.intensity_floor = parse_number<double>(key, value);
    else if (key == "damping") rc.damping = parse_number<double>(key, value);
    else if (key == "bins") cfg.bins = parse_number<int>(key, value);
    else if (key == "noiseless") cfg.noiseless = parse_bool(key, value);
    else if (key == "theory_samples") cfg.theory_samples = parse_number<std::size_t>(key, value);
    else if (key == "theory_grid") cfg.theory_grid = parse_number<int>(key, value);
    else if (key == "optimizer_starts") opt.starts = parse_number<int>(key, value);
    else if (key == "optimizer_evaluations") opt.max_evaluations = parse_number<int>(key, value);
    else if (key == "optimizer_spread") opt.spread_tolerance = parse_number<double>(key, value);
    else if (key == "optimizer_step") opt.initial_step = parse_number<double>(key, value);
    else if (key == "optimizer_seed") opt.seed = parse_number<std::uint64_t>(key, value);
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

/**
 * Reads an amplitude: one line per basis index, r whitespace-separated entries
 * per line written as re, re+imi or re-imi. '#' comments are skipped. The
 * result is normalized to unit Frobenius norm.
 */
inline PurifiedAmplitude read_amplitude(std::istream& in) {
  std::vector<std::vector<Complex>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    std::vector<Complex> row;
    for (std::string token; is >> token;) row.push_back(detail::parse_complex(token));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("amplitude file is empty");
  const std::size_t r = rows.front().size();
  CMatrix c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(r));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != r) throw std::invalid_argument("amplitude rows have unequal length");
    for (std::size_t k = 0; k < r; ++k) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return PurifiedAmplitude::normalized(std::move(c));
}

inline void write_amplitude(std::ostream& os, const PurifiedAmplitude& c) {
  for (int i = 0; i < c.dim(); ++i) {
    for (int k = 0; k < c.rank(); ++k) {
      if (k) os << ' ';
      os << detail::format_complex(c.matrix()(i, k));
    }
    os << '\n';
  }
}

/// Everything fixed before the runs start: protocol with exposures, true state, loss model.
struct Scenario {
  Protocol protocol;
  DensityMatrix truth;
  PurifiedAmplitude truth_amplitude;
  int true_rank = 1;
  int model_rank = 1;
};

inline Protocol build_protocol(const CampaignConfig& cfg) {
  Protocol p = tensor_power(named_protocol(cfg.protocol), cfg.qubits);
  if (cfg.degenerate) p = reduce_protocol(p);
  return p;
}

/// Campaign protocol with exposures n / a. In degenerate mode the exposures are
/// assigned before reduction, so both paths use bit-identical t_j.
inline Protocol exposed_protocol(const CampaignConfig& cfg) {
  Protocol p = assign_exposures(tensor_power(named_protocol(cfg.protocol), cfg.qubits), cfg.n);
  if (cfg.degenerate) p = reduce_protocol(p);
  return p;
}

inline PurifiedAmplitude build_true_state(const CampaignConfig& cfg) {
  switch (cfg.state) {
    case StateKind::ghz: return cfg.degenerate ? project_state(ghz(3)).state : ghz(cfg.qubits);
    case StateKind::w: return cfg.degenerate ? project_state(w_state(3)).state : w_state(cfg.qubits);
    case StateKind::ghz_mixture: {
      const DensityMatrix rho = ghz_mixture(cfg.mixture_weight, cfg.dimension());
      return amplitude_from_density(rho, rho.numerical_rank());
    }
    case StateKind::file: {
      std::ifstream in(cfg.state_file);
      if (!in) throw ConfigError("cannot open state file " + cfg.state_file.string());
      PurifiedAmplitude c = [&] {
        try {
          PurifiedAmplitude loaded = read_amplitude(in);
          return cfg.degenerate && loaded.dim() == 8 ? project_state(loaded).state : loaded;
        } catch (const std::invalid_argument& e) {
          throw ConfigError("state file " + cfg.state_file.string() + ": " + e.what());
        }
      }();
      if (c.dim() != cfg.dimension()) throw ConfigError("state file dimension does not match the configuration");
      return c;
    }
  }
  throw ConfigError("unsupported state");
}

inline Scenario build_scenario(const CampaignConfig& cfg) {
  cfg.validate();
  Protocol p = exposed_protocol(cfg);
  PurifiedAmplitude amplitude = build_true_state(cfg);
  DensityMatrix truth = cfg.state == StateKind::ghz_mixture ? ghz_mixture(cfg.mixture_weight, cfg.dimension())
                                                            : density_from_amplitude(amplitude);
  const int true_rank = truth.numerical_rank();
  if (amplitude.rank() != true_rank) amplitude = amplitude_from_density(truth, true_rank);
  return {std::move(p), std::move(truth), std::move(amplitude), true_rank, cfg.model_rank()};
}

/// Theoretical loss law when the model rank matches the true rank; empty otherwise.
inline std::optional<LossModel> scenario_loss_model(const Scenario& sc) {
  if (sc.model_rank != sc.true_rank) return std::nullopt;
  try {
    return loss_model(sc.protocol, sc.truth_amplitude);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  double total_counts = 0.0;
  int iterations = 0;
  bool converged = false;
  double fidelity = 0.0;
  double z = 0.0;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
};

struct Aggregates {
  double mean_fidelity = 0.0;
  double mean_loss = 0.0;
  /// n * mean(1 - F).
  double empirical_L = 0.0;
  double mean_z = 0.0;
  int converged_runs = 0;
};

/// Aggregates in run-index order; recomputing from stored records reproduces them exactly.
inline Aggregates aggregate(const std::vector<RunRecord>& runs, double n) {
  Aggregates a;
  if (runs.empty()) return a;
  double sum_f = 0.0, sum_loss = 0.0, sum_z = 0.0;
  for (const auto& r : runs) {
    sum_f += r.fidelity;
    sum_loss += 1.0 - r.fidelity;
    sum_z += r.z;
    a.converged_runs += r.converged ? 1 : 0;
  }
  const double count = static_cast<double>(runs.size());
  a.mean_fidelity = sum_f / count;
  a.mean_loss = sum_loss / count;
  a.empirical_L = n * a.mean_loss;
  a.mean_z = sum_z / count;
  return a;
}

/// Seeds derived from a run seed for the reconstruction starts and from the base seed for theory sampling.
inline std::uint64_t reconstruction_seed(std::uint64_t run_seed_value) { return run_seed_value ^ 0xD1B54A32D192ED03ULL; }
inline std::uint64_t theory_seed(std::uint64_t base_seed) { return mix_seed(base_seed, 0x7E0) ; }

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Sorted theoretical 1 - F samples, reusable across KS evaluations.
inline std::vector<double> theoretical_losses(const LossModel& model, std::size_t count, std::uint64_t seed) {
  auto samples = loss_distribution_samples(model, count, seed);
  std::sort(samples.begin(), samples.end());
  return samples;
}

inline KsResult ks_statistic(const std::vector<double>& losses, const std::vector<double>& reference) {
  const double d = ks_two_sample(losses, reference);
  return {d, ks_pvalue(d, losses.size(), reference.size())};
}

/// KS between empirical 1 - F values and `count` draws from the model.
inline KsResult ks_statistic(const std::vector<double>& losses, const LossModel& model, std::size_t count = 1000000,
                             std::uint64_t seed = 1) {
  return ks_statistic(losses, theoretical_losses(model, count, seed));
}

struct TheoryPoint {
  double z = 0.0;
  double density = 0.0;
};

struct HistogramTables {
  std::vector<HistogramBin> empirical;
  std::vector<TheoryPoint> theory;
};

/// Theoretical z density: `samples` loss draws binned on `grid` points (bin centres).
inline std::vector<TheoryPoint> theory_density(const LossModel& model, std::size_t samples = 1000000, int grid = 200,
                                               std::uint64_t seed = 1) {
  const auto losses = loss_distribution_samples(model, samples, seed);
  std::vector<double> z(losses.size());
  std::transform(losses.begin(), losses.end(), z.begin(), nines_from_loss);
  std::vector<TheoryPoint> out;
  for (const auto& bin : histogram(z, grid)) out.push_back({0.5 * (bin.left + bin.right), bin.density});
  return out;
}

/// Empirical z histogram with `bins` bins plus the theoretical density when a model is given.
inline HistogramTables emit_histogram(const std::vector<double>& z_values, int bins, const std::optional<LossModel>& model,
                                      std::size_t samples = 1000000, int grid = 200, std::uint64_t seed = 1) {
  HistogramTables out;
  out.empirical = histogram(z_values, bins);
  if (model) out.theory = theory_density(*model, samples, grid, seed);
  return out;
}

struct CampaignReport {
  CampaignConfig config;
  std::string protocol_name;
  int dimension = 0;
  int true_rank = 0;
  std::vector<RunRecord> runs;
  Aggregates aggregates;
  std::optional<LossModel> loss_model;
  std::optional<KsResult> ks;

  std::optional<double> theoretical_L() const {
    if (!loss_model) return std::nullopt;
    return loss_model->loss_functional();
  }
  std::vector<double> losses() const {
    std::vector<double> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back(1.0 - r.fidelity);
    return out;
  }
  std::vector<double> z_values() const {
    std::vector<double> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back(r.z);
    return out;
  }
};

inline double reconstruction_fidelity(const Scenario& sc, const ReconstructionResult& rec) {
  return fidelity(sc.truth_amplitude, rec.c_hat);
}

/// Counts of run `run`: expected counts in noiseless mode, else Poisson draws from the run seed.
inline CountData run_counts(const CampaignConfig& cfg, const Scenario& sc, int run) {
  const std::uint64_t seed = run_seed(cfg.base_seed, static_cast<std::uint64_t>(run));
  CountData counts = cfg.noiseless ? noiseless_counts(sc.protocol, sc.truth) : draw_counts(sc.protocol, sc.truth, seed);
  counts.seed = seed;
  return counts;
}

/// One simulated experiment: counts from the run seed, reconstruction, fidelity against the truth.
inline RunRecord simulate_run(const CampaignConfig& cfg, const Scenario& sc, int run) {
  const std::uint64_t seed = run_seed(cfg.base_seed, static_cast<std::uint64_t>(run));
  try {
    const CountData counts = run_counts(cfg, sc, run);
    ReconstructionConfig rc = cfg.reconstruction;
    rc.rank = sc.model_rank;
    rc.init_seed = reconstruction_seed(seed);
    const ReconstructionResult rec = solve_likelihood(counts, sc.protocol, rc);
    RunRecord record;
    record.run = run;
    record.seed = seed;
    record.total_counts = counts.total();
    record.iterations = rec.iterations;
    record.converged = rec.converged;
    record.fidelity = reconstruction_fidelity(sc, rec);
    record.z = nines(record.fidelity);
    record.log_likelihood = rec.log_likelihood;
    record.initial_log_likelihood = rec.initial_log_likelihood;
    return record;
  } catch (const std::exception& e) {
    throw NumericalError("run " + std::to_string(run) + " (seed " + std::to_string(seed) + "): " + e.what());
  }
}

/**
 * Monte Carlo campaign: per-run counts and reconstructions (concurrently up to
 * `jobs`), then aggregates, the theoretical loss law at the truth and the KS
 * comparison against it. Output is independent of `jobs`.
 */
inline CampaignReport run_campaign(const CampaignConfig& cfg, int jobs = 1) {
  const Scenario sc = build_scenario(cfg);
  CampaignReport report;
  report.config = cfg;
  report.protocol_name = sc.protocol.name();
  report.dimension = sc.protocol.dim();
  report.true_rank = sc.true_rank;
  report.loss_model = scenario_loss_model(sc);
  report.runs.resize(static_cast<std::size_t>(cfg.runs));
  parallel_for(report.runs.size(), jobs,
               [&](std::size_t i) { report.runs[i] = simulate_run(cfg, sc, static_cast<int>(i)); });
  report.aggregates = aggregate(report.runs, cfg.n);
  if (report.loss_model && cfg.runs >= 20)
    report.ks = ks_statistic(report.losses(), *report.loss_model, cfg.theory_samples, theory_seed(cfg.base_seed));
  return report;
}

struct ModelComparison {
  double mean_loss_pure = 0.0;
  double mean_loss_full = 0.0;
  /// mean(1 - F | r = s) / mean(1 - F | r = 1); NaN when degenerate.
  double ratio = 0.0;
  /// Set when the pure-model loss is too small for the ratio to mean anything.
  bool degenerate = false;
};

/// Runs the campaign with rank 1 and full rank on identical per-run counts.
inline ModelComparison compare_models(const CampaignConfig& cfg, int jobs = 1) {
  CampaignConfig pure = cfg;
  pure.rank = 1;
  CampaignConfig full = cfg;
  full.rank = 0;
  ModelComparison out;
  out.mean_loss_pure = run_campaign(pure, jobs).aggregates.mean_loss;
  out.mean_loss_full = run_campaign(full, jobs).aggregates.mean_loss;
  out.degenerate = !(out.mean_loss_pure > 1e-12);
  out.ratio = out.degenerate ? std::numeric_limits<double>::quiet_NaN() : out.mean_loss_full / out.mean_loss_pure;
  return out;
}

}  // namespace qtomo
