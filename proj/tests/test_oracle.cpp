#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtem/oracle.hpp"
#include "mtem/tsallis.hpp"
#include "test_util.hpp"

using namespace mtem;
using test::probs;

TEST_CASE("fd_scalar on smooth functions") {
  CHECK(fd_scalar([](double x) { return x * x; }, 3.0, 1e-4) == doctest::Approx(6.0).epsilon(1e-7));
  CHECK(fd_scalar([](double) { return 4.2; }, 1.0, 1e-4) == doctest::Approx(0.0));
  const PredictionProbs p = probs({0.7, 0.3});
  const double g = fd_scalar(
      [&p](double s) { return tsallis_loss(p, ClassIndex(0), EntropyIndex(s)); }, 2.0, 1e-4);
  CHECK(g == doctest::Approx(-0.0503275).epsilon(1e-5));
  CHECK_THROWS_AS(fd_scalar([](double x) { return x; }, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(fd_scalar([](double x) { return std::log(x); }, 0.0, 1e-4), std::domain_error);
}

TEST_CASE("fd_scalar truncation error shrinks quadratically") {
  // Richardson: halving h should cut the error by about 4x.
  auto f = [](double x) { return std::exp(x) * std::sin(x); };
  const double exact = std::exp(0.7) * (std::sin(0.7) + std::cos(0.7));
  const double err_h = std::abs(fd_scalar(f, 0.7, 1e-2) - exact);
  const double err_h2 = std::abs(fd_scalar(f, 0.7, 5e-3) - exact);
  CHECK(err_h / err_h2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("fd_grad_theta recovers linear coefficients exactly") {
  RngState rng(7);
  const ParameterVector theta = test::randomParams(rng, 2, 3);
  Eigen::VectorXd coeffs(theta.flat().size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs[i] = rng.gaussian();

  const ParameterGradient g = fd_grad_theta(
      [&coeffs](const ParameterVector& q) { return coeffs.dot(q.flat()); }, theta, 1e-5);
  CHECK((g.flat() - coeffs).cwiseAbs().maxCoeff() < 1e-9);

  const ParameterGradient zero =
      fd_grad_theta([](const ParameterVector&) { return 0.0; }, theta, 1e-5);
  CHECK(zero.flat().norm() == 0.0);
}

TEST_CASE("exact hypergradient oracle vanishes when eta is zero") {
  RngState rng(9);
  const Eigen::Index d = 4;
  const ParameterVector theta = test::randomParams(rng, 2, d);
  const SparseFeatures x0 = test::randomFeatures(rng, d);
  const SparseFeatures x1 = test::randomFeatures(rng, d);
  const SparseFeatures v0 = test::randomFeatures(rng, d);
  const std::vector<PseudoItem> batch{{0, &x0, ClassIndex(0)}, {1, &x1, ClassIndex(1)}};
  const std::vector<LabeledItem> valid{{&v0, ClassIndex(0)}};
  const EntropyIndexTable psi(2, 2.0, 1e-3, 10.0);

  const PsiGradientMap grads = exact_hypergrad_psi_fd(theta, batch, valid, psi, 0.0, 1e-4);
  for (const auto& [id, g] : grads) CHECK(g == doctest::Approx(0.0));

  // Perturbations that exit the valid index region are rejected.
  CHECK_THROWS_AS(exact_hypergrad_psi_fd(theta, batch, valid, psi, 0.1, 9.0), std::domain_error);
}

TEST_CASE("compare summarizes agreement between gradients") {
  Eigen::VectorXd a(3);
  a << 1.0, -2.0, 0.5;

  const GradComparison same = compare(a, a);
  CHECK(same.cosine_similarity == doctest::Approx(1.0));
  CHECK(same.max_relative_error == 0.0);
  CHECK(same.max_absolute_error == 0.0);

  const GradComparison flipped = compare(a, Eigen::VectorXd(-a));
  CHECK(flipped.cosine_similarity == doctest::Approx(-1.0));

  const GradComparison scaled = compare(a, Eigen::VectorXd(1.01 * a));
  CHECK(scaled.max_relative_error == doctest::Approx(0.01).epsilon(1e-12));

  const GradComparison zeros = compare(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  CHECK(zeros.cosine_similarity == 1.0);

  CHECK_THROWS_AS(compare(a, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}
