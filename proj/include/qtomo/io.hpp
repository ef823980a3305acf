#pragma once

// Serialization of campaign artifacts. CSV files use '.' decimals, ',' separators,
// LF line endings and 17 significant digits, so every double round-trips exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtomo/campaign.hpp"

namespace qtomo::io {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "run,seed,total_counts,iterations,converged,fidelity,z\n";
  for (const auto& r : runs)
    os << r.run << ',' << r.seed << ',' << fmt(r.total_counts) << ',' << r.iterations << ',' << (r.converged ? 1 : 0)
       << ',' << fmt(r.fidelity) << ',' << fmt(r.z) << '\n';
}

inline std::vector<RunRecord> read_runs_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "run,seed,total_counts,iterations,converged,fidelity,z")
    throw std::invalid_argument("runs.csv: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::invalid_argument("runs.csv: expected 7 columns");
    RunRecord r;
    r.run = std::stoi(cells[0]);
    r.seed = std::stoull(cells[1]);
    r.total_counts = std::stod(cells[2]);
    r.iterations = std::stoi(cells[3]);
    r.converged = cells[4] == "1";
    r.fidelity = std::stod(cells[5]);
    r.z = std::stod(cells[6]);
    out.push_back(r);
  }
  return out;
}

/// Count file: header "j,k,t", one row per protocol row, j 0-based.
inline void write_counts_csv(std::ostream& os, const CountData& counts) {
  os << "j,k,t\n";
  for (int j = 0; j < counts.rows(); ++j) os << j << ',' << fmt(counts.k(j)) << ',' << fmt(counts.t(j)) << '\n';
}

inline CountData read_counts_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "j,k,t") throw std::invalid_argument("count file: expected header j,k,t");
  std::vector<double> k, t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3) throw std::invalid_argument("count file: expected 3 columns");
    if (std::stoul(cells[0]) != k.size()) throw std::invalid_argument("count file: rows must be numbered 0, 1, ...");
    k.push_back(std::stod(cells[1]));
    t.push_back(std::stod(cells[2]));
  }
  CountData out;
  out.k = Eigen::Map<const RVector>(k.data(), static_cast<Eigen::Index>(k.size()));
  out.t = Eigen::Map<const RVector>(t.data(), static_cast<Eigen::Index>(t.size()));
  out.n_expected = out.t.sum();
  return out;
}

inline void write_hist_empirical(std::ostream& os, const std::vector<HistogramBin>& bins) {
  os << "bin_left,bin_right,count,density\n";
  for (const auto& b : bins) os << fmt(b.left) << ',' << fmt(b.right) << ',' << b.count << ',' << fmt(b.density) << '\n';
}

inline void write_hist_theory(std::ostream& os, const std::vector<TheoryPoint>& points) {
  os << "z,density\n";
  for (const auto& p : points) os << fmt(p.z) << ',' << fmt(p.density) << '\n';
}

inline nlohmann::ordered_json config_json(const CampaignConfig& cfg) {
  nlohmann::ordered_json j;
  j["protocol"] = cfg.protocol;
  j["qubits"] = cfg.qubits;
  j["degenerate"] = cfg.degenerate;
  j["state"] = to_string(cfg.state);
  if (cfg.state == StateKind::ghz_mixture) j["mixture_weight"] = cfg.mixture_weight;
  if (cfg.state == StateKind::file) j["state_file"] = cfg.state_file.filename().string();
  j["n"] = cfg.n;
  j["runs"] = cfg.runs;
  j["rank"] = cfg.model_rank();
  j["base_seed"] = cfg.base_seed;
  j["tolerance"] = cfg.reconstruction.tolerance;
  j["max_iterations"] = cfg.reconstruction.max_iterations;
  j["restarts"] = cfg.reconstruction.restarts;
  j["intensity_floor"] = cfg.reconstruction.intensity_floor;
  j["damping"] = cfg.reconstruction.damping;
  j["bins"] = cfg.bins;
  j["noiseless"] = cfg.noiseless;
  j["theory_samples"] = cfg.theory_samples;
  return j;
}

inline nlohmann::ordered_json loss_model_json(const LossModel& model, int s, int r) {
  nlohmann::ordered_json j;
  j["nu"] = model.nu;
  j["n"] = model.n;
  j["d"] = std::vector<double>(model.d.data(), model.d.data() + model.d.size());
  j["mean_loss"] = model.mean_loss();
  j["mean_fidelity"] = 1.0 - model.mean_loss();
  j["L"] = model.loss_functional();
  if (r == 1) j["L_min"] = minimal_loss(s);
  return j;
}

inline nlohmann::ordered_json report_json(const CampaignReport& report) {
  nlohmann::ordered_json j;
  j["generator"] = std::string("qtomo ") + QTOMO_VERSION;
  j["config"] = config_json(report.config);
  j["protocol"] = report.protocol_name;
  j["dimension"] = report.dimension;
  j["true_rank"] = report.true_rank;
  const auto& a = report.aggregates;
  nlohmann::ordered_json agg;
  agg["runs"] = report.runs.size();
  agg["converged_runs"] = a.converged_runs;
  agg["mean_fidelity"] = a.mean_fidelity;
  agg["mean_loss"] = a.mean_loss;
  agg["empirical_L"] = a.empirical_L;
  agg["mean_z"] = a.mean_z;
  agg["theoretical_L"] = report.theoretical_L() ? nlohmann::ordered_json(*report.theoretical_L()) : nullptr;
  agg["ks_statistic"] = report.ks ? nlohmann::ordered_json(report.ks->statistic) : nullptr;
  agg["ks_p_value"] = report.ks ? nlohmann::ordered_json(report.ks->p_value) : nullptr;
  j["aggregates"] = agg;
  j["loss_model"] = report.loss_model ? loss_model_json(*report.loss_model, report.dimension, report.config.model_rank())
                                      : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

/// Writes report.json, runs.csv, hist_empirical.csv, hist_theory.csv and protocol.txt into dir.
inline void write_campaign(const std::filesystem::path& dir, const CampaignReport& report, const Protocol& protocol) {
  std::filesystem::create_directories(dir);
  open_output(dir / "report.json") << report_json(report).dump(2) << '\n';
  {
    auto os = open_output(dir / "runs.csv");
    write_runs_csv(os, report.runs);
  }
  const auto tables = emit_histogram(report.z_values(), report.config.bins, report.loss_model,
                                     report.config.theory_samples, report.config.theory_grid,
                                     theory_seed(report.config.base_seed));
  {
    auto os = open_output(dir / "hist_empirical.csv");
    write_hist_empirical(os, tables.empirical);
  }
  {
    auto os = open_output(dir / "hist_theory.csv");
    write_hist_theory(os, tables.theory);
  }
  {
    auto os = open_output(dir / "protocol.txt");
    write_protocol(os, protocol);
  }
}

}  // namespace qtomo::io
