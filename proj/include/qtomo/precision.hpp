#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "qtomo/core.hpp"
#include "qtomo/parallel.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/sampling.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

// Real parametrization of an s x r amplitude: theta = (Re vec(c), Im vec(c)),
// vec stacking columns, so entry (l, k) sits at k*s + l and k*s + l + r*s.

inline RVector to_real(const CMatrix& c) {
  const Eigen::Index n = c.size();
  RVector theta(2 * n);
  for (Eigen::Index k = 0; k < c.cols(); ++k)
    for (Eigen::Index l = 0; l < c.rows(); ++l) {
      theta(k * c.rows() + l) = c(l, k).real();
      theta(n + k * c.rows() + l) = c(l, k).imag();
    }
  return theta;
}

inline CMatrix from_real(const RVector& theta, int s, int r) {
  const Eigen::Index n = static_cast<Eigen::Index>(s) * r;
  if (theta.size() != 2 * n) throw std::invalid_argument("parameter vector has wrong length");
  CMatrix c(s, r);
  for (int k = 0; k < r; ++k)
    for (int l = 0; l < s; ++l) c(l, k) = Complex(theta(k * s + l), theta(n + k * s + l));
  return c;
}

/// Gradient of lambda_j = Tr(c^dagger Lambda_j c) in the real parametrization: 2 (Re w, Im w), w = Lambda_j c.
inline RVector intensity_gradient(const Protocol& p, int j, const PurifiedAmplitude& c) {
  const CMatrix w = intensity_operator(p, j) * c.matrix();
  return 2.0 * to_real(w);
}

/**
 * Poisson Fisher information of the counts about the real amplitude parameters:
 * H = sum_j (t_j / lambda_j) g_j g_j^T with g_j the intensity gradient.
 * Gauge directions c -> cU span r^2 null directions.
 */
struct InformationMatrix {
  RMatrix H;
  int s = 0;
  int r = 0;
  /// Expected total count sum_j lambda_j t_j at the evaluation point.
  double n_expected = 0.0;
  CMatrix c;

  /// Ascending eigenvalues.
  RVector eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(H, Eigen::EigenvaluesOnly);
    return eig.eigenvalues();
  }

  int null_count(double rel_tol = 1e-8) const {
    const RVector ev = eigenvalues();
    const double cutoff = rel_tol * ev.maxCoeff();
    return static_cast<int>((ev.array() < cutoff).count());
  }
};

inline InformationMatrix information_matrix(const Protocol& p, const PurifiedAmplitude& c, double floor = 1e-12) {
  require_exposures(p);
  (void)completeness_factor(p);
  if (c.dim() != p.dim()) throw std::invalid_argument("information_matrix: dimension mismatch");
  const int s = c.dim();
  const int r = c.rank();
  const RVector lambda = intensities(p, c);
  const RVector& t = p.exposures();
  // Columns of `grads` are the gradients scaled by sqrt(t_j / lambda_j); H = grads grads^T.
  RMatrix grads(2 * s * r, p.rows());
  const CMatrix xc = p.instrument() * c.matrix();  // m x r, row j is X_j c
  for (int j = 0; j < p.rows(); ++j) {
    if (lambda(j) < floor) {
      grads.col(j).setZero();
      continue;
    }
    const CVector row = p.instrument().row(j).adjoint();          // X_j^dagger
    const CMatrix w = row * xc.row(j);                             // Lambda_j c
    grads.col(j) = 2.0 * std::sqrt(t(j) / lambda(j)) * to_real(w);
  }
  RMatrix H = grads * grads.transpose();
  H = 0.5 * (H + H.transpose());
  return {std::move(H), s, r, lambda.dot(t), c.matrix()};
}

/// Closed-form Hessian of 1 - F around a pure state: projector orthogonal to c and i c.
inline RMatrix pure_fidelity_hessian(const PurifiedAmplitude& c) {
  if (c.rank() != 1) throw std::invalid_argument("pure_fidelity_hessian needs a rank-1 amplitude");
  const RVector v = to_real(c.matrix());
  const RVector u = to_real(Complex(0.0, 1.0) * c.matrix());
  return RMatrix::Identity(v.size(), v.size()) - v * v.transpose() - u * u.transpose();
}

/**
 * B with 1 - F(rho(c), rho(normalize(c + delta))) = delta^T B delta + O(|delta|^3),
 * by symmetric second differences with step h; off-diagonal entries via
 * B_ij = (q(e_i + e_j) - q(e_i - e_j)) / 4.
 */
inline RMatrix fidelity_hessian(const PurifiedAmplitude& c, double h = 1e-4) {
  const int s = c.dim();
  const int r = c.rank();
  const RVector theta0 = to_real(c.matrix());
  const Eigen::Index n = theta0.size();

  std::function<double(const RVector&)> loss;
  if (r == 1) {
    loss = [&](const RVector& theta) {
      return 1.0 - fidelity_pure(c, PurifiedAmplitude::normalized(from_real(theta, s, r)));
    };
  } else {
    loss = [&](const RVector& theta) {
      const CMatrix d = from_real(theta, s, r);
      return 1.0 - detail::factor_fidelity(c.matrix(), d / d.norm());
    };
  }
  // Symmetrized quadratic form along direction v.
  auto q = [&](const RVector& v) { return (loss(theta0 + h * v) + loss(theta0 - h * v)) / (2.0 * h * h); };

  RMatrix B(n, n);
  RVector v = RVector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v.setZero();
    v(i) = 1.0;
    B(i, i) = q(v);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      v.setZero();
      v(i) = 1.0;
      v(j) = 1.0;
      const double plus = q(v);
      v(j) = -1.0;
      const double minus = q(v);
      B(i, j) = B(j, i) = (plus - minus) / 4.0;
    }
  }
  return B;
}

/**
 * Asymptotic fidelity-loss law 1 - F = sum_j d_j xi_j^2 with xi_j ~ N(0, 1).
 * L = n * sum d_j is the sample-size normalized mean loss.
 */
struct LossModel {
  RVector d;
  int nu = 0;
  double n = 0.0;

  double mean_loss() const { return d.sum(); }
  double loss_functional() const { return n * d.sum(); }
};

inline int degrees_of_freedom(int s, int r) { return (2 * s - r) * r - 1; }

/// Orthonormal basis of the directions along which 1 - F is exactly flat: c and c A, A anti-Hermitian.
inline RMatrix symmetry_directions(const CMatrix& c) {
  const int r = static_cast<int>(c.cols());
  std::vector<RVector> dirs;
  dirs.push_back(to_real(c));
  for (int a = 0; a < r; ++a)
    for (int b = a; b < r; ++b) {
      CMatrix gen = CMatrix::Zero(r, r);
      if (a == b) {
        gen(a, a) = Complex(0.0, 1.0);
        dirs.push_back(to_real(c * gen));
      } else {
        gen(a, b) = 1.0;
        gen(b, a) = -1.0;
        dirs.push_back(to_real(c * gen));
        gen(a, b) = Complex(0.0, 1.0);
        gen(b, a) = Complex(0.0, 1.0);
        dirs.push_back(to_real(c * gen));
      }
    }
  RMatrix m(dirs.front().size(), static_cast<Eigen::Index>(dirs.size()));
  for (std::size_t k = 0; k < dirs.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = dirs[k];
  Eigen::JacobiSVD<RMatrix> svd(m, Eigen::ComputeThinU);
  const double cutoff = 1e-10 * svd.singularValues()(0);
  const auto rank = (svd.singularValues().array() > cutoff).count();
  return svd.matrixU().leftCols(rank);
}

/**
 * d_j are the nonzero eigenvalues of Sigma^(1/2) B Sigma^(1/2), Sigma = pinv(H).
 * B is first restricted to the complement of the exact flat directions of the
 * fidelity (radial and gauge), which removes finite-difference noise there.
 * Throws NumericalError when the count differs from (2s - r) r - 1.
 */
inline LossModel loss_coefficients(const InformationMatrix& info, const RMatrix& B) {
  const Eigen::Index dim = info.H.rows();
  if (B.rows() != dim || B.cols() != dim) throw std::invalid_argument("loss_coefficients: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<RMatrix> eig_h(info.H);
  const RVector h = eig_h.eigenvalues();
  const double h_cut = 1e-8 * h.maxCoeff();
  RVector inv_sqrt(dim);
  for (Eigen::Index i = 0; i < dim; ++i) inv_sqrt(i) = h(i) > h_cut ? 1.0 / std::sqrt(h(i)) : 0.0;
  const RMatrix sigma_half = eig_h.eigenvectors() * inv_sqrt.asDiagonal() * eig_h.eigenvectors().transpose();

  const RMatrix flat = symmetry_directions(info.c);
  const RMatrix proj = RMatrix::Identity(dim, dim) - flat * flat.transpose();
  const RMatrix b_clean = proj * (0.5 * (B + B.transpose())) * proj;

  RMatrix m = sigma_half * b_clean * sigma_half;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<RMatrix> eig_m(m, Eigen::EigenvaluesOnly);
  const RVector ev = eig_m.eigenvalues();
  const double top = ev.maxCoeff();
  std::vector<double> kept;
  for (Eigen::Index i = dim - 1; i >= 0; --i)
    if (top > 0.0 && ev(i) > 1e-10 * top) kept.push_back(ev(i));
  const int nu = degrees_of_freedom(info.s, info.r);
  if (static_cast<int>(kept.size()) != nu)
    throw NumericalError("degenerate precision model: " + std::to_string(kept.size()) + " nonzero coefficients, expected " +
                         std::to_string(nu));
  LossModel model;
  model.d = Eigen::Map<const RVector>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  model.nu = nu;
  model.n = info.n_expected;
  return model;
}

/// Loss model of protocol p at state c (numerical fidelity Hessian).
inline LossModel loss_model(const Protocol& p, const PurifiedAmplitude& c) {
  return loss_coefficients(information_matrix(p, c), fidelity_hessian(c));
}

/// Loss model of protocol p at a pure state, with the closed-form fidelity Hessian.
inline LossModel pure_loss_model(const Protocol& p, const PurifiedAmplitude& c) {
  return loss_coefficients(information_matrix(p, c), pure_fidelity_hessian(c));
}

/// Monte Carlo draws of sum_j d_j xi_j^2.
inline std::vector<double> loss_distribution_samples(const LossModel& model, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample count must be positive");
  Rng rng(seed);
  std::vector<double> out(count);
  for (auto& value : out) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < model.d.size(); ++j) {
      const double xi = rng.normal();
      sum += model.d(j) * xi * xi;
    }
    value = sum;
  }
  return out;
}

/// Smallest achievable L for pure states of dimension s.
inline double minimal_loss(int s) {
  if (s < 2) throw std::invalid_argument("minimal_loss needs dimension >= 2");
  return static_cast<double>(s - 1);
}

// ---------------------------------------------------------------------------
// Worst-case search

struct NelderMeadResult {
  RVector x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/**
 * Minimizes f from x0 with the standard Nelder-Mead moves (reflection 1,
 * expansion 2, contraction 1/2, shrink 1/2). Stops when the spread of simplex
 * values falls below `spread` or after `max_evals` evaluations. Non-finite
 * values are treated as +infinity.
 */
inline NelderMeadResult nelder_mead(const std::function<double(const RVector&)>& f, const RVector& x0, double step,
                                    int max_evals, double spread) {
  const Eigen::Index n = x0.size();
  int evals = 0;
  auto eval = [&](const RVector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  std::vector<RVector> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  vals[0] = eval(x0);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts[static_cast<std::size_t>(i + 1)](i) += step;
    vals[static_cast<std::size_t>(i + 1)] = eval(pts[static_cast<std::size_t>(i + 1)]);
  }
  std::vector<std::size_t> order(pts.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] < spread) break;

    RVector centroid = RVector::Zero(n);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
    centroid /= static_cast<double>(n);

    const RVector reflected = centroid + (centroid - pts[worst]);
    const double fr = eval(reflected);
    if (fr < vals[best]) {
      const RVector expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const RVector contracted = outside ? RVector(centroid + 0.5 * (reflected - centroid))
                                       : RVector(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      vals[k] = eval(pts[k]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  return {pts[static_cast<std::size_t>(it - vals.begin())], *it, evals};
}

struct OptimizerSettings {
  int starts = 64;
  /// Objective evaluations per start.
  int max_evaluations = 2000;
  double spread_tolerance = 1e-6;
  double initial_step = 0.1;
  std::uint64_t seed = 20170101;
  int jobs = 1;
};

struct WorstCase {
  PurifiedAmplitude state;
  double loss = 0.0;
  int start = 0;
  int evaluations = 0;
};

/**
 * Multi-start maximization of L(c) = n * sum_j d_j(c) over pure states.
 * Each start is a Haar-random state refined by Nelder-Mead on the 2s real
 * coordinates (renormalized inside the objective); when a local search stops
 * early, it is restarted from its best point while budget remains.
 * Ties are broken by the lower start index.
 */
inline WorstCase maximize_loss(const Protocol& p, double n, const OptimizerSettings& settings = {}) {
  if (settings.starts < 1 || settings.max_evaluations < 1) throw std::invalid_argument("optimizer budget must be positive");
  const Protocol exposed = assign_exposures(p, n);
  const int s = p.dim();
  auto objective = [&](const RVector& theta) {
    const CMatrix c = from_real(theta, s, 1);
    const double norm = c.norm();
    if (!(norm > 1e-8)) return std::numeric_limits<double>::infinity();
    try {
      const PurifiedAmplitude state = PurifiedAmplitude::normalized(c);
      return -pure_loss_model(exposed, state).loss_functional();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<NelderMeadResult> results(static_cast<std::size_t>(settings.starts));
  parallel_for(results.size(), settings.jobs, [&](std::size_t start) {
    RVector x = to_real(random_pure(s, mix_seed(settings.seed, start)).matrix());
    NelderMeadResult total{x, objective(x), 1};
    while (total.evaluations < settings.max_evaluations) {
      const auto local = nelder_mead(objective, total.x, settings.initial_step,
                                     settings.max_evaluations - total.evaluations, settings.spread_tolerance);
      total.evaluations += local.evaluations;
      const bool improved = local.value < total.value - settings.spread_tolerance;
      if (local.value < total.value) {
        total.x = local.x / local.x.norm();
        total.value = local.value;
      }
      if (!improved) break;
    }
    results[start] = std::move(total);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < results.size(); ++k)
    if (results[k].value < results[best].value) best = k;
  if (!std::isfinite(results[best].value)) throw NumericalError("loss maximization found no valid state");
  return {PurifiedAmplitude::normalized(from_real(results[best].x, s, 1)), -results[best].value, static_cast<int>(best),
          results[best].evaluations};
}

}  // namespace qtomo
