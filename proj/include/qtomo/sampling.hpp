#pragma once

#include <cstdint>
#include <vector>

#include "qtomo/core.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/**
 * Observed counts per protocol row. Counts are stored as doubles so that
 * noiseless (expected) counts can be fed through the same estimators; drawn
 * counts are always integer-valued.
 */
struct CountData {
  RVector k;
  RVector t;
  std::uint64_t seed = 0;
  double n_expected = 0.0;

  int rows() const { return static_cast<int>(k.size()); }
  double total() const { return k.sum(); }

  void validate(const Protocol& p) const {
    if (k.size() != p.rows() || t.size() != p.rows()) throw std::invalid_argument("count data does not match protocol rows");
    if ((k.array() < 0.0).any()) throw std::invalid_argument("counts must be nonnegative");
  }
};

/**
 * Poisson variate with the given mean.
 *
 * mean < 10: sequential inversion of the CDF from one uniform.
 * mean >= 10: PTRS transformed rejection with squeeze (Hoermann 1993), which
 * is exact and uses no normal approximation.
 * Both paths consume uniforms only from `rng`, so output is fixed per seed.
 */
inline std::int64_t poisson(Rng& rng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("Poisson mean must be finite and nonnegative");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::int64_t>(k);
  }
}

inline void require_exposures(const Protocol& p) {
  if (!p.exposures_assigned()) throw std::invalid_argument("protocol '" + p.name() + "' has no assigned exposures");
}

/// lambda_j t_j.
inline RVector expected_counts(const Protocol& p, const DensityMatrix& rho) {
  require_exposures(p);
  return intensities(p, rho).cwiseProduct(p.exposures());
}

/// Independent Poisson counts with means lambda_j t_j, drawn row by row from one stream.
inline CountData draw_counts(const Protocol& p, const DensityMatrix& rho, std::uint64_t seed) {
  const RVector mean = expected_counts(p, rho);
  Rng rng(seed);
  CountData out;
  out.k.resize(p.rows());
  for (int j = 0; j < p.rows(); ++j) out.k(j) = static_cast<double>(poisson(rng, mean(j)));
  out.t = p.exposures();
  out.seed = seed;
  out.n_expected = mean.sum();
  return out;
}

/// Counts equal to their expectations; fixed points of the likelihood iteration.
inline CountData noiseless_counts(const Protocol& p, const DensityMatrix& rho) {
  CountData out;
  out.k = expected_counts(p, rho);
  out.t = p.exposures();
  out.n_expected = out.k.sum();
  return out;
}

/// Per-run seed for campaigns: base XOR (run_index * odd constant).
inline std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run_index) {
  return base_seed ^ (run_index * 0x9E3779B97F4A7C15ULL);
}

}  // namespace qtomo
