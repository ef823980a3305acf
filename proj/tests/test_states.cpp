#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qtomo/states.hpp"
#include "test_util.hpp"

using namespace qtomo;

TEST(States, DensityOfBasisVector) {
  const auto rho = density_from_amplitude(basis_state(8, 0));
  CMatrix expected = CMatrix::Zero(8, 8);
  expected(0, 0) = 1.0;
  EXPECT_LT((rho.matrix() - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(States, DensityOfGhz) {
  const auto rho = density_from_amplitude(ghz(3));
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const bool corner = (i == 0 || i == 7) && (j == 0 || j == 7);
      EXPECT_NEAR(rho.matrix()(i, j).real(), corner ? 0.5 : 0.0, 1e-15) << i << "," << j;
      EXPECT_EQ(rho.matrix()(i, j).imag(), 0.0);
    }
}

TEST(States, MaximallyMixedPurification) {
  const auto c = PurifiedAmplitude(CMatrix::Identity(8, 8) / std::sqrt(8.0));
  const auto rho = density_from_amplitude(c);
  EXPECT_LT((rho.matrix() - CMatrix::Identity(8, 8) / 8.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(States, AmplitudeInvariants) {
  EXPECT_THROW(PurifiedAmplitude(CMatrix::Ones(2, 1)), std::invalid_argument);
  EXPECT_THROW(PurifiedAmplitude(CMatrix::Identity(2, 3) / std::sqrt(2.0)), std::invalid_argument);
  EXPECT_THROW(PurifiedAmplitude::normalized(CMatrix::Zero(3, 1)), std::invalid_argument);
  EXPECT_NO_THROW(PurifiedAmplitude::normalized(CMatrix::Ones(3, 2)));
}

TEST(States, DensityInvariants) {
  CMatrix not_hermitian = CMatrix::Identity(2, 2) / 2.0;
  not_hermitian(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix{not_hermitian}, std::invalid_argument);
  EXPECT_THROW(DensityMatrix{CMatrix::Identity(2, 2)}, std::invalid_argument);
  CMatrix negative = CMatrix::Zero(2, 2);
  negative(0, 0) = 1.5;
  negative(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix{negative}, std::invalid_argument);
}

TEST(States, GhzAmplitudes) {
  const auto g3 = ghz(3).matrix();
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(std::abs(g3(i, 0)), (i == 0 || i == 7) ? 1 / std::sqrt(2.0) : 0.0, 1e-15);
  const auto g2 = ghz(2).matrix();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(g2(i, 0)), (i == 0 || i == 3) ? 1 / std::sqrt(2.0) : 0.0, 1e-15);
  EXPECT_NEAR(fidelity_pure(ghz(3), basis_state(8, 0)), 0.5, 1e-15);  // |VVV> is index 0
  EXPECT_THROW(ghz(1), std::invalid_argument);
}

TEST(States, WStateAmplitudes) {
  const auto w = w_state(3);
  for (int i = 0; i < 8; ++i)
    EXPECT_NEAR(std::abs(w.matrix()(i, 0)), (i == 1 || i == 2 || i == 4) ? 1 / std::sqrt(3.0) : 0.0, 1e-15);
  EXPECT_NEAR(w.matrix().norm(), 1.0, 1e-15);
  EXPECT_EQ(fidelity_pure(w, ghz(3)), 0.0);
  EXPECT_THROW(w_state(1), std::invalid_argument);
}

TEST(States, GhzMixture) {
  const auto pure = ghz_mixture(0.0, 8);
  EXPECT_LT((pure.matrix() - density_from_amplitude(ghz(3)).matrix()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((ghz_mixture(1.0, 8).matrix() - CMatrix::Identity(8, 8) / 8.0).cwiseAbs().maxCoeff(), 1e-15);

  const RVector ev = ghz_mixture(0.5, 8).eigenvalues();  // ascending
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(ev(i), 1.0 / 16.0, 1e-14);
  EXPECT_NEAR(ev(7), 9.0 / 16.0, 1e-14);

  EXPECT_THROW(ghz_mixture(-0.1, 8), std::invalid_argument);
  EXPECT_THROW(ghz_mixture(1.1, 8), std::invalid_argument);
  EXPECT_THROW(ghz_mixture(0.5, 2), std::invalid_argument);
}

TEST(States, FidelityPure) {
  const auto g = ghz(3);
  EXPECT_NEAR(fidelity_pure(g, g), 1.0, 1e-15);
  EXPECT_EQ(fidelity_pure(basis_state(8, 7), basis_state(8, 0)), 0.0);  // |HHH> vs |VVV>
  for (double theta : {0.3, 1.7, -2.9}) {
    const PurifiedAmplitude rotated(g.matrix() * std::polar(1.0, theta));
    EXPECT_NEAR(fidelity_pure(g, rotated), 1.0, 1e-15);
  }
  EXPECT_THROW(fidelity_pure(ghz(2), ghz(3)), std::invalid_argument);
}

TEST(States, FidelityMixed) {
  const auto rho = ghz_mixture(0.5, 8);
  const auto g = density_from_amplitude(ghz(3));
  EXPECT_NEAR(fidelity_mixed(rho, rho), 1.0, 1e-12);
  EXPECT_NEAR(fidelity_mixed(ghz_mixture(1.0, 8), g), 1.0 / 8.0, 1e-12);
  EXPECT_NEAR(fidelity_mixed(rho, g), 9.0 / 16.0, 1e-12);
  EXPECT_THROW(fidelity_mixed(rho, ghz_mixture(0.5, 4)), std::invalid_argument);
}

TEST(States, Purity) {
  EXPECT_NEAR(purity(density_from_amplitude(ghz(3))), 1.0, 1e-15);
  EXPECT_NEAR(purity(ghz_mixture(1.0, 8)), 1.0 / 8.0, 1e-15);
  // Sum of squared eigenvalues {9/16, 1/16 x 7} = 88/256.
  EXPECT_NEAR(purity(ghz_mixture(0.5, 8)), 88.0 / 256.0, 1e-15);
}

TEST(States, RandomPure) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_NEAR(random_pure(8, seed).matrix().norm(), 1.0, 1e-12);
  EXPECT_EQ(random_pure(8, 42).matrix(), random_pure(8, 42).matrix());
  EXPECT_NE(random_pure(8, 42).matrix(), random_pure(8, 43).matrix());
}

TEST(States, RandomPureHaarMoment) {
  // E|c_0|^2 = 1/s for Haar-random vectors.
  double sum = 0.0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) sum += std::norm(random_pure(2, static_cast<std::uint64_t>(k)).matrix()(0, 0));
  EXPECT_NEAR(sum / draws, 0.5, 0.02);
}

TEST(States, Nines) {
  EXPECT_NEAR(nines(0.9999), 4.0, 1e-10);
  EXPECT_EQ(nines(0.0), 0.0);
  EXPECT_FALSE(std::signbit(nines(0.0)));
  EXPECT_EQ(nines(1.0), 15.0);
  EXPECT_EQ(nines(1.0 - 1e-17), 15.0);
}

TEST(States, AmplitudeFromDensity) {
  const auto rho = ghz_mixture(0.5, 8);
  const auto c = amplitude_from_density(rho, 8);
  EXPECT_LT((density_from_amplitude(c).matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(rho.numerical_rank(), 8);
  EXPECT_EQ(density_from_amplitude(ghz(3)).numerical_rank(), 1);
}

// --- properties ------------------------------------------------------------

TEST(StatesProperty, DensityFromRandomAmplitudeIsValid) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int s = 1 + static_cast<int>(rng.bits() % 8);
    const int r = 1 + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(s));
    const auto c = testutil::random_amplitude(s, r, rng);
    const auto rho = density_from_amplitude(c);
    EXPECT_LT((rho.matrix() - rho.matrix().adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-12);
    EXPECT_GE(rho.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(StatesProperty, FidelitySymmetryAndPureConsistency) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 2 + static_cast<int>(rng.bits() % 7);
    const int r1 = 1 + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(s));
    const int r2 = 1 + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(s));
    const auto a = density_from_amplitude(testutil::random_amplitude(s, r1, rng));
    const auto b = density_from_amplitude(testutil::random_amplitude(s, r2, rng));
    EXPECT_NEAR(fidelity_mixed(a, b), fidelity_mixed(b, a), 1e-10);

    const auto p1 = testutil::random_amplitude(s, 1, rng);
    const auto p2 = testutil::random_amplitude(s, 1, rng);
    EXPECT_NEAR(fidelity_mixed(density_from_amplitude(p1), density_from_amplitude(p2)), fidelity_pure(p1, p2), 1e-10);
    // One pure argument reduces to <psi|rho|psi>.
    const Complex expectation = p1.matrix().col(0).dot(b.matrix() * p1.matrix().col(0));
    EXPECT_NEAR(fidelity_mixed(density_from_amplitude(p1), b), expectation.real(), 1e-10);
  }
}

TEST(StatesProperty, FidelityOneIffStatesCoincide) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 2 + static_cast<int>(rng.bits() % 7);
    const int r = 1 + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(s));
    const auto c = testutil::random_amplitude(s, r, rng);
    const auto rho = density_from_amplitude(c);
    // Same state up to a 1e-8 perturbation: F = 1 and close in norm.
    CMatrix nudged = c.matrix();
    nudged(0, 0) += 1e-8;
    const auto sigma = density_from_amplitude(PurifiedAmplitude::normalized(nudged));
    EXPECT_LT((rho.matrix() - sigma.matrix()).norm(), 1e-6);
    EXPECT_NEAR(fidelity_mixed(rho, sigma), 1.0, 1e-10);
    // Independent random state: neither.
    const auto other = density_from_amplitude(testutil::random_amplitude(s, r, rng));
    EXPECT_GT((rho.matrix() - other.matrix()).norm(), 1e-6);
    EXPECT_LT(fidelity_mixed(rho, other), 1.0 - 1e-10);
  }
}

TEST(StatesProperty, GaugeInvariance) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 2 + static_cast<int>(rng.bits() % 7);
    const int r = 1 + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(s));
    const auto c = testutil::random_amplitude(s, r, rng);
    const CMatrix u = testutil::random_unitary(r, rng);
    const auto rotated = PurifiedAmplitude::normalized(c.matrix() * u);
    EXPECT_LT((density_from_amplitude(c).matrix() - density_from_amplitude(rotated).matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}
