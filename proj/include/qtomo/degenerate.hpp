#pragma once

#include <bit>

#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/**
 * Isometry from the permutation-symmetric three-qubit subspace (the ququart
 * basis |3V>, |2V,1H>, |1V,2H>, |3H>) into the full 8-dimensional space.
 * Column k is the normalized sum of all basis words of Hamming weight k.
 */
class SymmetricBasisMap {
 public:
  SymmetricBasisMap() : g_(RMatrix::Zero(8, 4)) {
    const double w = 1.0 / std::sqrt(3.0);
    for (int index = 0; index < 8; ++index) {
      const int weight = std::popcount(static_cast<unsigned>(index));
      g_(index, weight) = (weight == 0 || weight == 3) ? 1.0 : w;
    }
  }

  const RMatrix& matrix() const { return g_; }
  CMatrix complex_matrix() const { return g_.cast<Complex>(); }

 private:
  RMatrix g_;
};

inline SymmetricBasisMap basis_map() { return {}; }

struct SymmetricProjection {
  PurifiedAmplitude state;
  /// Frobenius norm of G^dagger c before renormalization.
  double weight;
};

/// c4 = G^dagger c8, renormalized. Throws when the symmetric weight is below 1e-12.
inline SymmetricProjection project_state(const PurifiedAmplitude& c8) {
  if (c8.dim() != 8) throw std::invalid_argument("project_state needs an 8-dimensional amplitude");
  if (c8.rank() > 4) throw std::invalid_argument("project_state needs rank at most 4");
  CMatrix c4 = basis_map().complex_matrix().adjoint() * c8.matrix();
  const double weight = c4.norm();
  if (weight < 1e-12) throw std::invalid_argument("state is orthogonal to the symmetric subspace");
  c4 /= weight;
  return {PurifiedAmplitude(std::move(c4)), weight};
}

inline PurifiedAmplitude lift_state(const PurifiedAmplitude& c4) {
  if (c4.dim() != 4) throw std::invalid_argument("lift_state needs a 4-dimensional amplitude");
  return PurifiedAmplitude::normalized(basis_map().complex_matrix() * c4.matrix());
}

inline DensityMatrix lift_density(const DensityMatrix& rho4) {
  if (rho4.dim() != 4) throw std::invalid_argument("lift_density needs a 4-dimensional state");
  const CMatrix g = basis_map().complex_matrix();
  return DensityMatrix(hermitian_part(g * rho4.matrix() * g.adjoint()));
}

/// X4 = X8 G with exposures and row order unchanged.
inline Protocol reduce_protocol(const Protocol& p) {
  if (p.dim() != 8) throw std::invalid_argument("reduce_protocol needs an 8-dimensional protocol");
  return Protocol(p.name() + "/symmetric", p.instrument() * basis_map().complex_matrix(), p.exposures(),
                  p.exposures_assigned());
}

}  // namespace qtomo
