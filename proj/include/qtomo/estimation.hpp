#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "qtomo/core.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/sampling.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

struct ReconstructionConfig {
  int rank = 1;
  double tolerance = 1e-10;
  int max_iterations = 5000;
  int restarts = 1;
  double intensity_floor = 1e-12;
  std::uint64_t init_seed = 0;
  /// Step relaxation c <- (1 - d) c + d I^-1 J c before normalization; 0 is the plain iteration.
  double damping = 0.0;

  void validate(int s) const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (rank < 1 || rank > s) throw std::invalid_argument("rank must lie in [1, dim]");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
    if (restarts < 1) throw std::invalid_argument("restarts must be positive");
    if (!(intensity_floor > 0.0)) throw std::invalid_argument("intensity floor must be positive");
    if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("damping must lie in [0, 1)");
  }
};

struct ReconstructionResult {
  PurifiedAmplitude c_hat;
  DensityMatrix rho_hat;
  int iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  /// Restart index that produced this result.
  int restart = 0;
};

/**
 * Poisson log-likelihood sum_j [k_j ln(max(lambda_j t_j, eps t_j)) - lambda_j t_j - ln k_j!].
 * Rows with k_j = 0 contribute only -lambda_j t_j.
 */
inline double log_likelihood(const CountData& counts, const Protocol& p, const PurifiedAmplitude& c,
                             double floor = 1e-12) {
  counts.validate(p);
  const RVector lambda = intensities(p, c);
  double total = 0.0;
  for (int j = 0; j < p.rows(); ++j) {
    const double mean = lambda(j) * counts.t(j);
    total -= mean;
    const double k = counts.k(j);
    if (k > 0.0) total += k * std::log(std::max(mean, floor * counts.t(j))) - std::lgamma(k + 1.0);
  }
  return total;
}

struct LikelihoodMatrices {
  CMatrix I;
  CMatrix J;
};

/// I = sum_j t_j Lambda_j and J = sum_j (k_j / lambda_j) Lambda_j, lambda floored when k_j > 0.
inline LikelihoodMatrices build_IJ(const CountData& counts, const Protocol& p, const PurifiedAmplitude& c,
                                   double floor = 1e-12) {
  counts.validate(p);
  const RVector lambda = intensities(p, c);
  RVector weight(p.rows());
  for (int j = 0; j < p.rows(); ++j)
    weight(j) = counts.k(j) > 0.0 ? counts.k(j) / std::max(lambda(j), floor) : 0.0;
  const CMatrix& x = p.instrument();
  return {hermitian_part(x.adjoint() * counts.t.asDiagonal() * x), hermitian_part(x.adjoint() * weight.asDiagonal() * x)};
}

/**
 * Relative stationarity defect ||I c' - J c'||_F / ||I c'||_F of the likelihood
 * equation, evaluated at c' = kappa c with kappa^2 = sum_j k_j / Tr(c^dagger I c),
 * the overall intensity that maximizes the likelihood along the ray through c.
 */
inline double residual(const CountData& counts, const Protocol& p, const PurifiedAmplitude& c, double floor = 1e-12) {
  const auto [I, J] = build_IJ(counts, p, c, floor);
  const CMatrix ic = I * c.matrix();
  const double expected = (c.matrix().adjoint() * ic).trace().real();
  const double kappa2 = counts.total() / expected;
  const CMatrix jc = J * c.matrix();
  const double denom = (kappa2 * ic).norm();
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return (kappa2 * ic - jc).norm() / denom;
}

namespace detail {

/// r orthonormal columns from seeded complex Gaussians, scaled to unit Frobenius norm.
inline CMatrix random_start(int s, int r, std::uint64_t seed) {
  Rng rng(seed);
  CMatrix g(s, r);
  for (int col = 0; col < r; ++col)
    for (int row = 0; row < s; ++row) g(row, col) = rng.complex_normal();
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * CMatrix::Identity(s, r);
  return q / std::sqrt(static_cast<double>(r));
}

/// Applies I^-1 to the columns of b; scalar division when I is proportional to identity.
class InverseInformation {
 public:
  explicit InverseInformation(const CMatrix& I) {
    const double scale = I.trace().real() / static_cast<double>(I.rows());
    scalar_ = (I - scale * CMatrix::Identity(I.rows(), I.cols())).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    if (scalar_) {
      inv_scale_ = 1.0 / scale;
    } else {
      ldlt_.compute(I);
      if (ldlt_.info() != Eigen::Success) throw NumericalError("information operator I is singular");
    }
  }

  CMatrix apply(const CMatrix& b) const { return scalar_ ? CMatrix(inv_scale_ * b) : CMatrix(ldlt_.solve(b)); }

 private:
  bool scalar_ = false;
  double inv_scale_ = 0.0;
  Eigen::LDLT<CMatrix> ldlt_;
};

inline double state_change(const PurifiedAmplitude& a, const PurifiedAmplitude& b) {
  return 1.0 - fidelity(a, b);
}

inline PurifiedAmplitude fixed_point_update(const CountData& counts, const Protocol& p, const InverseInformation& inverse,
                                            const PurifiedAmplitude& c, double floor, double damping) {
  const CMatrix& x = p.instrument();
  const RVector lambda = intensities(p, c);
  RVector weight(p.rows());
  for (int j = 0; j < p.rows(); ++j) weight(j) = counts.k(j) > 0.0 ? counts.k(j) / std::max(lambda(j), floor) : 0.0;
  CMatrix next = inverse.apply(x.adjoint() * (weight.asDiagonal() * (x * c.matrix())));
  if (damping > 0.0) {
    // Bring c to the likelihood-optimal intensity scale before mixing with the step.
    const double scale = std::sqrt(counts.total() / lambda.dot(counts.t));
    next = (1.0 - damping) * scale * c.matrix() + damping * next;
  }
  return PurifiedAmplitude::normalized(std::move(next));
}

inline CMatrix information_operator(const CountData& counts, const Protocol& p) {
  return hermitian_part(p.instrument().adjoint() * counts.t.asDiagonal() * p.instrument());
}

}  // namespace detail

/// One fixed-point step c <- normalize(I^-1 J(c) c).
inline PurifiedAmplitude likelihood_step(const CountData& counts, const Protocol& p, const PurifiedAmplitude& c,
                                         double floor = 1e-12, double damping = 0.0) {
  counts.validate(p);
  const detail::InverseInformation inverse(detail::information_operator(counts, p));
  return detail::fixed_point_update(counts, p, inverse, c, floor, damping);
}

/**
 * Maximum-likelihood reconstruction by fixed-point iteration of I c = J c.
 *
 * Each restart begins from a seeded random start; iteration stops once
 * 1 - F(rho_i, rho_{i+1}) < tolerance (compared on density matrices since c is
 * gauge-ambiguous for r > 1) and the residual is at most 10 * tolerance, or
 * after max_iterations. The restart with the
 * highest log-likelihood is returned, converged or not.
 */
inline ReconstructionResult solve_likelihood(const CountData& counts, const Protocol& p,
                                             const ReconstructionConfig& cfg) {
  cfg.validate(p.dim());
  counts.validate(p);
  (void)completeness_factor(p);  // throws for incomplete protocols
  const detail::InverseInformation inverse(detail::information_operator(counts, p));

  std::optional<ReconstructionResult> best;
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    const auto start_seed = mix_seed(cfg.init_seed, static_cast<std::uint64_t>(restart));
    PurifiedAmplitude c(detail::random_start(p.dim(), cfg.rank, start_seed));
    const double initial_ll = log_likelihood(counts, p, c, cfg.intensity_floor);
    bool converged = false;
    int iterations = 0;
    while (iterations < cfg.max_iterations) {
      PurifiedAmplitude updated =
          detail::fixed_point_update(counts, p, inverse, c, cfg.intensity_floor, cfg.damping);
      ++iterations;
      const double change = detail::state_change(c, updated);
      c = std::move(updated);
      // A small step alone can mean slow progress, so also require stationarity.
      if (change < cfg.tolerance && residual(counts, p, c, cfg.intensity_floor) <= 10.0 * cfg.tolerance) {
        converged = true;
        break;
      }
    }
    ReconstructionResult result{c,
                                density_from_amplitude(c),
                                iterations,
                                converged,
                                residual(counts, p, c, cfg.intensity_floor),
                                log_likelihood(counts, p, c, cfg.intensity_floor),
                                initial_ll,
                                restart};
    if (!best || result.log_likelihood > best->log_likelihood) best = std::move(result);
  }
  return *best;
}

}  // namespace qtomo
