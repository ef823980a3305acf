#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "qtomo/core.hpp"

namespace qtomo {

/**
 * Rank-r purification of a quantum state: an s x r complex matrix c with unit
 * Frobenius norm, so that rho = c c^dagger. r = 1 describes a pure state.
 *
 * c is defined up to a gauge c -> cU for unitary U (r x r).
 */
class PurifiedAmplitude {
 public:
  static constexpr double kNormTolerance = 1e-12;

  explicit PurifiedAmplitude(CMatrix c) : c_(std::move(c)) {
    if (c_.rows() < 1 || c_.cols() < 1) throw std::invalid_argument("amplitude must be non-empty");
    if (c_.cols() > c_.rows()) throw std::invalid_argument("amplitude rank exceeds dimension");
    if (std::abs(c_.norm() - 1.0) > kNormTolerance)
      throw std::invalid_argument("amplitude must have unit Frobenius norm");
  }

  /// Rescales c to unit Frobenius norm; throws if c vanishes.
  static PurifiedAmplitude normalized(CMatrix c) {
    const double norm = c.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("cannot normalize a zero amplitude");
    c /= norm;
    return PurifiedAmplitude(std::move(c));
  }

  static PurifiedAmplitude pure(const CVector& v) { return normalized(CMatrix(v)); }

  int dim() const { return static_cast<int>(c_.rows()); }
  int rank() const { return static_cast<int>(c_.cols()); }
  const CMatrix& matrix() const { return c_; }
  CVector column(int k) const { return c_.col(k); }

 private:
  CMatrix c_;
};

/// Hermitian, unit-trace, positive semidefinite s x s matrix.
class DensityMatrix {
 public:
  static constexpr double kHermitianTolerance = 1e-12;
  static constexpr double kTraceTolerance = 1e-12;
  static constexpr double kEigenvalueFloor = -1e-10;

  explicit DensityMatrix(CMatrix rho) : rho_(std::move(rho)) {
    if (rho_.rows() < 1 || rho_.rows() != rho_.cols()) throw std::invalid_argument("density matrix must be square");
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance)
      throw std::invalid_argument("density matrix must be Hermitian");
    if (std::abs(rho_.trace() - Complex(1.0, 0.0)) > kTraceTolerance)
      throw std::invalid_argument("density matrix must have unit trace");
    if (eigenvalues().minCoeff() < kEigenvalueFloor)
      throw std::invalid_argument("density matrix must be positive semidefinite");
  }

  int dim() const { return static_cast<int>(rho_.rows()); }
  const CMatrix& matrix() const { return rho_; }

  /// Ascending eigenvalues.
  RVector eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho_, Eigen::EigenvaluesOnly);
    return eig.eigenvalues();
  }

  /// Number of eigenvalues above tol * largest eigenvalue.
  int numerical_rank(double tol = 1e-10) const {
    const RVector ev = eigenvalues();
    const double cutoff = tol * ev.maxCoeff();
    return static_cast<int>((ev.array() > cutoff).count());
  }

 private:
  CMatrix rho_;
};

inline DensityMatrix density_from_amplitude(const PurifiedAmplitude& c) {
  return DensityMatrix(hermitian_part(c.matrix() * c.matrix().adjoint()));
}

/**
 * Rank-r purification of rho from its r leading eigenpairs, c = V sqrt(diag(p)).
 * When r is below the numerical rank the discarded weight is renormalized away.
 */
inline PurifiedAmplitude amplitude_from_density(const DensityMatrix& rho, int rank) {
  const int s = rho.dim();
  if (rank < 1 || rank > s) throw std::invalid_argument("rank must lie in [1, dim]");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.matrix());
  CMatrix c(s, rank);
  for (int k = 0; k < rank; ++k) {
    const int idx = s - 1 - k;  // descending order
    c.col(k) = eig.eigenvectors().col(idx) * std::sqrt(std::max(eig.eigenvalues()(idx), 0.0));
  }
  return PurifiedAmplitude::normalized(std::move(c));
}

// Basis convention: index = binary word with the leftmost qubit most significant,
// |0> = |V>, |1> = |H>. So |VVV> is index 0 and |HHH> is index 7.

inline int qubit_dimension(int qubits) {
  if (qubits < 1 || qubits > 20) throw std::invalid_argument("qubit count out of range");
  return 1 << qubits;
}

inline PurifiedAmplitude basis_state(int s, int index) {
  if (index < 0 || index >= s) throw std::out_of_range("basis index out of range");
  CVector v = CVector::Zero(s);
  v(index) = 1.0;
  return PurifiedAmplitude(CMatrix(v));
}

inline PurifiedAmplitude ghz(int qubits) {
  if (qubits < 2) throw std::invalid_argument("GHZ state needs at least two qubits");
  const int s = qubit_dimension(qubits);
  CVector v = CVector::Zero(s);
  v(0) = v(s - 1) = 1.0 / std::sqrt(2.0);
  return PurifiedAmplitude(CMatrix(v));
}

inline PurifiedAmplitude w_state(int qubits) {
  if (qubits < 2) throw std::invalid_argument("W state needs at least two qubits");
  const int s = qubit_dimension(qubits);
  CVector v = CVector::Zero(s);
  for (int q = 0; q < qubits; ++q) v(1 << q) = 1.0 / std::sqrt(static_cast<double>(qubits));
  return PurifiedAmplitude(CMatrix(v));
}

/**
 * f * I/s + (1 - f) |GHZ><GHZ|. For s = 4 the GHZ vector is its image in the
 * permutation-symmetric basis, (1, 0, 0, 1)/sqrt(2).
 */
inline DensityMatrix ghz_mixture(double f, int s) {
  if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("mixture weight must lie in [0, 1]");
  if (s != 4 && s != 8) throw std::invalid_argument("GHZ mixture is defined for dimension 4 or 8");
  CVector g = CVector::Zero(s);
  g(0) = g(s - 1) = 1.0 / std::sqrt(2.0);
  CMatrix rho = (f / s) * CMatrix::Identity(s, s) + (1.0 - f) * (g * g.adjoint());
  return DensityMatrix(std::move(rho));
}

inline double fidelity_pure(const PurifiedAmplitude& a, const PurifiedAmplitude& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  if (a.rank() != 1 || b.rank() != 1) throw std::invalid_argument("fidelity_pure needs rank-1 amplitudes");
  const Complex overlap = a.matrix().col(0).dot(b.matrix().col(0));
  return std::clamp(std::norm(overlap), 0.0, 1.0);
}

namespace detail {

/// Squared trace norm of a^dagger b: the fidelity of a a^dagger and b b^dagger.
inline double factor_fidelity(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("fidelity: dimension mismatch");
  const CMatrix overlap = a.adjoint() * b;
  const double trace_norm = Eigen::JacobiSVD<CMatrix>(overlap).singularValues().sum();
  return std::clamp(trace_norm * trace_norm, 0.0, 1.0);
}

/// a with a a^dagger = rho, dropping eigenvalues below 1e-14 (round-off level for unit trace).
inline CMatrix density_factor(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.matrix());
  const RVector& ev = eig.eigenvalues();
  const auto kept = static_cast<Eigen::Index>((ev.array() > 1e-14).count());
  CMatrix a(rho.dim(), kept);
  for (Eigen::Index k = 0; k < kept; ++k) {
    const Eigen::Index idx = ev.size() - 1 - k;
    a.col(k) = eig.eigenvectors().col(idx) * std::sqrt(ev(idx));
  }
  return a;
}

}  // namespace detail

/**
 * Squared Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2, evaluated as the
 * squared trace norm of A^dagger B for factors a = A A^dagger, b = B B^dagger.
 */
inline double fidelity_mixed(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  return detail::factor_fidelity(detail::density_factor(a), detail::density_factor(b));
}

/// Fidelity between two purified states, directly from the amplitudes.
inline double fidelity(const PurifiedAmplitude& a, const PurifiedAmplitude& b) {
  if (a.rank() == 1 && b.rank() == 1) return fidelity_pure(a, b);
  return detail::factor_fidelity(a.matrix(), b.matrix());
}

inline double purity(const DensityMatrix& rho) {
  return (rho.matrix() * rho.matrix()).trace().real();
}

/// Haar-uniform pure state: s independent complex Gaussians, normalized.
inline PurifiedAmplitude random_pure(int s, std::uint64_t seed) {
  if (s < 1) throw std::invalid_argument("dimension must be positive");
  Rng rng(seed);
  CVector v(s);
  for (int i = 0; i < s; ++i) v(i) = rng.complex_normal();
  return PurifiedAmplitude::pure(v);
}

/// -log10(loss) with the loss floored at 1e-15, so the result lies in [0, 15] for loss <= 1.
inline double nines_from_loss(double loss) {
  return std::min(0.0 - std::log10(std::max(loss, 1e-15)), 15.0);
}

/// Number of nines z = -log10(1 - F).
inline double nines(double fidelity_value) { return nines_from_loss(1.0 - fidelity_value); }

}  // namespace qtomo
