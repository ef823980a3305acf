#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qtomo/precision.hpp"
#include "qtomo/stats.hpp"
#include "test_util.hpp"

using namespace qtomo;

namespace {

Protocol exposed_power(const Protocol& single, int qubits, double n) { return assign_exposures(tensor_power(single, qubits), n); }

RVector sorted(RVector v) {
  std::sort(v.data(), v.data() + v.size());
  return v;
}

}  // namespace

TEST(Precision, RealParametrizationRoundTrip) {
  Rng rng(1);
  const auto c = testutil::random_amplitude(4, 3, rng);
  const RVector theta = to_real(c.matrix());
  EXPECT_EQ(theta.size(), 24);
  EXPECT_EQ(theta(1 * 4 + 2), c.matrix()(2, 1).real());
  EXPECT_EQ(theta(12 + 1 * 4 + 2), c.matrix()(2, 1).imag());
  EXPECT_EQ(from_real(theta, 4, 3), c.matrix());
  EXPECT_THROW(from_real(theta, 4, 2), std::invalid_argument);
}

TEST(Precision, CubeInformationMatrix) {
  const double n = 300.0;
  const auto p = assign_exposures(cube(), n);
  const auto info = information_matrix(p, basis_state(2, 0));
  const RVector ev = info.eigenvalues();  // ascending
  EXPECT_NEAR(ev(0), 0.0, 1e-10 * n);
  EXPECT_NEAR(ev(1), 4.0 * n / 3.0, 1e-10 * n);
  EXPECT_NEAR(ev(2), 4.0 * n / 3.0, 1e-10 * n);
  EXPECT_NEAR(ev(3), 4.0 * n, 1e-10 * n);
  EXPECT_EQ(info.null_count(), 1);
  EXPECT_NEAR(info.n_expected, n, 1e-10);
}

TEST(Precision, CubeLossModel) {
  const double n = 300.0;
  const auto p = assign_exposures(cube(), n);
  for (const auto& model : {loss_model(p, basis_state(2, 0)), pure_loss_model(p, basis_state(2, 0))}) {
    ASSERT_EQ(model.nu, 2);
    ASSERT_EQ(model.d.size(), 2);
    EXPECT_NEAR(model.d(0), 3.0 / (4.0 * n), 1e-8 / n);
    EXPECT_NEAR(model.d(1), 3.0 / (4.0 * n), 1e-8 / n);
    EXPECT_NEAR(model.loss_functional(), 1.5, 1e-7);
  }
}

TEST(Precision, CubeLossMatchesMonteCarlo) {
  // Average 1 - F over states drawn from the asymptotic Gaussian law
  // c + dc, dc ~ N(0, pinv(H)), agrees with sum d_j.
  const double n = 1e6;
  const auto p = assign_exposures(cube(), n);
  const auto c = basis_state(2, 0);
  const auto info = information_matrix(p, c);
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(info.H);
  Rng rng(12);
  const int draws = 20000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) {
    RVector delta = RVector::Zero(4);
    for (int i = 0; i < 4; ++i)
      if (eig.eigenvalues()(i) > 1e-8 * eig.eigenvalues().maxCoeff())
        delta += eig.eigenvectors().col(i) * rng.normal() / std::sqrt(eig.eigenvalues()(i));
    const auto moved = PurifiedAmplitude::normalized(from_real(to_real(c.matrix()) + delta, 2, 1));
    sum += 1.0 - fidelity_pure(c, moved);
  }
  EXPECT_NEAR(n * sum / draws, 1.5, 0.05);
}

TEST(Precision, GaugeDirectionIsNull) {
  Rng rng(2);
  const auto p = exposed_power(octahedron(), 3, 1e5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = testutil::random_amplitude(8, 1, rng);
    const auto info = information_matrix(p, c);
    const RVector phase = to_real(Complex(0.0, 1.0) * c.matrix());
    EXPECT_LT((info.H * phase).cwiseAbs().maxCoeff(), 1e-8 * info.H.cwiseAbs().maxCoeff());
  }
}

TEST(Precision, TetraGhzInformationSpectrum) {
  const auto info = information_matrix(exposed_power(tetrahedron(), 3, 1e5), ghz(3));
  const RVector ev = info.eigenvalues();
  const double top = ev.maxCoeff();
  EXPECT_EQ((ev.array() < 1e-8 * top).count(), 1);
  EXPECT_EQ((ev.array() > 1e-8 * top).count(), 15);
  EXPECT_LT((info.H - info.H.transpose()).cwiseAbs().maxCoeff(), 1e-10 * top);
  EXPECT_GE(ev.minCoeff(), -1e-8 * top);
}

TEST(Precision, GhzFidelityHessian) {
  const RMatrix b = fidelity_hessian(ghz(3));
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(0.5 * (b + b.transpose()));
  const RVector ev = eig.eigenvalues();
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(ev(i), 0.0, 1e-6);
  for (int i = 2; i < 16; ++i) EXPECT_NEAR(ev(i), 1.0, 1e-6);
  EXPECT_LT((b - pure_fidelity_hessian(ghz(3))).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Precision, RadialDirectionIsFlat) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = testutil::random_amplitude(4 + 4 * (trial % 2), 1, rng);
    const RVector radial = to_real(c.matrix());
    EXPECT_LT((fidelity_hessian(c) * radial).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((pure_fidelity_hessian(c) * radial).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Precision, FidelityHessianIsQuadraticForm) {
  Rng rng(4);
  const auto c = testutil::random_amplitude(4, 2, rng);
  const RMatrix b = fidelity_hessian(c);
  const RVector theta = to_real(c.matrix());
  for (int trial = 0; trial < 10; ++trial) {
    RVector delta(theta.size());
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta(i) = 1e-3 * rng.normal();
    const auto moved = PurifiedAmplitude::normalized(from_real(theta + delta, 4, 2));
    const double loss = 1.0 - fidelity_mixed(density_from_amplitude(c), density_from_amplitude(moved));
    const double quad = delta.dot(b * delta);
    EXPECT_NEAR(loss, quad, 0.05 * quad + 1e-9);
  }
}

TEST(Precision, MixtureFidelityHessianNullSpace) {
  const auto rho = ghz_mixture(0.5, 8);
  const RMatrix b = fidelity_hessian(amplitude_from_density(rho, 8));
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(0.5 * (b + b.transpose()), Eigen::EigenvaluesOnly);
  const RVector ev = eig.eigenvalues();
  EXPECT_GE(ev.minCoeff(), -1e-5);
  EXPECT_GE((ev.array().abs() < 1e-5).count(), 64);
}

TEST(Precision, DegreesOfFreedom) {
  EXPECT_EQ(degrees_of_freedom(2, 1), 2);
  EXPECT_EQ(degrees_of_freedom(8, 1), 14);
  EXPECT_EQ(degrees_of_freedom(8, 8), 63);
  EXPECT_EQ(degrees_of_freedom(4, 4), 15);
}

TEST(Precision, GhzLosses) {
  const auto tetra = pure_loss_model(exposed_power(tetrahedron(), 3, 1e5), ghz(3));
  EXPECT_EQ(tetra.nu, 14);
  EXPECT_NEAR(tetra.loss_functional(), 8.63643, 1e-4);
  const auto octa = pure_loss_model(exposed_power(octahedron(), 3, 1e5), ghz(3));
  EXPECT_NEAR(octa.loss_functional(), 7.73958, 1e-4);
  const auto numeric = loss_model(exposed_power(tetrahedron(), 3, 1e5), ghz(3));
  EXPECT_NEAR(numeric.loss_functional(), tetra.loss_functional(), 1e-5);
}

TEST(PrecisionProperty, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const std::vector<Protocol> protocols{tensor_power(tetrahedron(), 3), tensor_power(cube(), 2), octahedron()};
  for (int trial = 0; trial < 100; ++trial) {
    const auto& p = protocols[static_cast<std::size_t>(trial % 3)];
    const int r = 1 + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(p.dim()));
    const auto c = testutil::random_amplitude(p.dim(), r, rng);
    const int j = static_cast<int>(rng.bits() % static_cast<std::uint64_t>(p.rows()));
    const RVector g = intensity_gradient(p, j, c);
    const RVector theta = to_real(c.matrix());
    auto lambda = [&](const RVector& x) { return (p.instrument().row(j) * from_real(x, p.dim(), r)).squaredNorm(); };
    RVector fd(theta.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      RVector plus = theta, minus = theta;
      plus(i) += h;
      minus(i) -= h;
      fd(i) = (lambda(plus) - lambda(minus)) / (2.0 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-6 * g.norm() + 1e-12) << "trial " << trial;
  }
}

TEST(PrecisionProperty, NullCountIsRankSquared) {
  Rng rng(6);
  const std::vector<Protocol> protocols{assign_exposures(cube(), 1e3), exposed_power(tetrahedron(), 2, 1e4),
                                        exposed_power(octahedron(), 3, 1e5)};
  for (const auto& p : protocols)
    for (int r : {1, p.dim()})
      for (int trial = 0; trial < 20; ++trial) {
        const auto c = testutil::random_amplitude(p.dim(), r, rng);
        EXPECT_EQ(information_matrix(p, c).null_count(), r * r) << p.name() << " r=" << r;
      }
}

TEST(PrecisionProperty, CoefficientCountIsNu) {
  Rng rng(7);
  const auto p3 = exposed_power(tetrahedron(), 3, 1e5);
  const auto p2 = exposed_power(octahedron(), 2, 1e5);
  for (int trial = 0; trial < 5; ++trial) {
    EXPECT_EQ(loss_model(p3, testutil::random_amplitude(8, 1, rng)).d.size(), 14);
    EXPECT_EQ(pure_loss_model(p3, testutil::random_amplitude(8, 1, rng)).d.size(), 14);
    EXPECT_EQ(loss_model(p2, testutil::random_amplitude(4, 4, rng)).d.size(), 15);
    EXPECT_EQ(loss_model(p2, testutil::random_amplitude(4, 2, rng)).d.size(), 11);
  }
  const auto mixed = loss_model(p3, amplitude_from_density(ghz_mixture(0.5, 8), 8));
  EXPECT_EQ(mixed.nu, 63);
  EXPECT_EQ(mixed.d.size(), 63);
  EXPECT_GT(mixed.d.minCoeff(), 0.0);
}

TEST(PrecisionProperty, WrongRankIsDegenerate) {
  // A rank-2 amplitude whose density has rank 1 cannot carry (2s - 2) 2 - 1 coefficients.
  CMatrix c = CMatrix::Zero(4, 2);
  c(0, 0) = 1.0;
  EXPECT_THROW(loss_model(exposed_power(tetrahedron(), 2, 1e4), PurifiedAmplitude(c)), NumericalError);
}

TEST(PrecisionProperty, ScaleLaw) {
  Rng rng(8);
  const auto c = testutil::random_amplitude(8, 1, rng);
  const auto one = pure_loss_model(exposed_power(octahedron(), 3, 1.0), c);
  const auto big = pure_loss_model(exposed_power(octahedron(), 3, 1e5), c);
  EXPECT_LT((sorted(one.d) / 1e5 - sorted(big.d)).cwiseAbs().maxCoeff(), 1e-12 * one.d.maxCoeff() / 1e5);
  EXPECT_NEAR(one.loss_functional(), big.loss_functional(), 1e-9);
}

TEST(PrecisionProperty, LowerBound) {
  Rng rng(9);
  for (const auto& single : {tetrahedron(), octahedron()}) {
    const auto p = exposed_power(single, 3, 1e5);
    for (int trial = 0; trial < 50; ++trial)
      EXPECT_GE(pure_loss_model(p, testutil::random_amplitude(8, 1, rng)).loss_functional(), 7.0 - 1e-6);
  }
}

TEST(Precision, LossSamples) {
  LossModel zero{RVector::Zero(3), 3, 1.0};
  for (double v : loss_distribution_samples(zero, 100, 1)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(loss_distribution_samples(zero, 0, 1), std::invalid_argument);

  const auto model = pure_loss_model(exposed_power(tetrahedron(), 3, 1e5), ghz(3));
  const std::size_t count = 1000000;
  const auto samples = loss_distribution_samples(model, count, 2);
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(count);
  EXPECT_NEAR(mean, model.d.sum(), 3.0 * std::sqrt(2.0 * model.d.squaredNorm() / static_cast<double>(count)));
  EXPECT_EQ(samples, loss_distribution_samples(model, count, 2));
}

TEST(Precision, LossSamplesFollowChiSquareOne) {
  LossModel unit{RVector::Ones(1), 1, 1.0};
  auto samples = loss_distribution_samples(unit, 100000, 3);
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = std::erf(std::sqrt(samples[i] / 2.0));
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - cdf), std::abs(static_cast<double>(i) / n - cdf)});
  }
  EXPECT_GT(kolmogorov_survival(std::sqrt(n) * d), 0.01) << "D = " << d;
}

TEST(Precision, MinimalLoss) {
  EXPECT_EQ(minimal_loss(8), 7.0);
  EXPECT_EQ(minimal_loss(4), 3.0);
  EXPECT_EQ(minimal_loss(2), 1.0);
  EXPECT_THROW(minimal_loss(1), std::invalid_argument);
}

TEST(Precision, NelderMeadQuadratic) {
  auto f = [](const RVector& x) { return (x(0) - 1.0) * (x(0) - 1.0) + 10.0 * (x(1) + 2.0) * (x(1) + 2.0); };
  const auto result = nelder_mead(f, RVector::Zero(2), 0.5, 2000, 1e-14);
  EXPECT_NEAR(result.x(0), 1.0, 1e-5);
  EXPECT_NEAR(result.x(1), -2.0, 1e-5);
  EXPECT_LE(result.evaluations, 2000);
}

TEST(Precision, MaximizeLossSmall) {
  const auto p = tensor_power(tetrahedron(), 2);
  const auto worst = maximize_loss(p, 1e4, OptimizerSettings{});
  // Beats random sampling. GHZ itself is no bound: rows with zero intensity make L jump there.
  double sampled = 0.0;
  for (std::uint64_t k = 0; k < 2000; ++k)
    sampled = std::max(sampled, pure_loss_model(assign_exposures(p, 1e4), random_pure(4, k)).loss_functional());
  EXPECT_GE(worst.loss, sampled);
  EXPECT_GE(sampled, minimal_loss(4));
  EXPECT_NEAR(pure_loss_model(assign_exposures(p, 1e4), worst.state).loss_functional(), worst.loss, 1e-9);
}

TEST(Precision, MaximizeLossIndependentOfJobs) {
  const auto p = tensor_power(tetrahedron(), 2);
  OptimizerSettings settings;
  settings.starts = 4;
  settings.max_evaluations = 400;
  const auto worst = maximize_loss(p, 1e4, settings);
  settings.jobs = 3;
  const auto threaded = maximize_loss(p, 1e4, settings);
  EXPECT_EQ(threaded.loss, worst.loss);
  EXPECT_EQ(threaded.start, worst.start);
  EXPECT_EQ(threaded.state.matrix(), worst.state.matrix());
}
