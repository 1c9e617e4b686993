#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtem/oracle.hpp"
#include "mtem/tsallis.hpp"
#include "test_util.hpp"

using namespace mtem;
using test::probs;
using test::randomSimplex;

namespace {

EntropyIndex psi(double v) { return EntropyIndex(v); }

double randomPsi(RngState& rng, double lo = 1.1, double hi = 8.0) {
  return lo + (hi - lo) * rng.uniform();
}

}  // namespace

TEST_CASE("tsallis entropy matches direct substitution") {
  CHECK(tsallis_entropy(probs({1.0, 0.0, 0.0}), psi(3.0)) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(tsallis_entropy(probs({0.5, 0.5}), psi(2.0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tsallis_entropy(probs({0.25, 0.25, 0.25, 0.25}), psi(2.0)) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("tsallis entropy rejects invalid inputs") {
  CHECK_THROWS_AS(psi(1.0), std::domain_error);
  CHECK_THROWS_AS(psi(0.5), std::domain_error);
  CHECK_THROWS_AS(PredictionProbs(Eigen::Vector2d(0.5, 0.6)), std::domain_error);
  CHECK_THROWS_AS(PredictionProbs(Eigen::Vector2d(1.2, -0.2)), std::domain_error);
}

TEST_CASE("gibbs entropy analytic values") {
  CHECK(gibbs_entropy(probs({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(gibbs_entropy(probs({0.5, 0.5})) == doctest::Approx(std::log(2.0)));
  CHECK(gibbs_entropy(probs({0.7, 0.3})) == doctest::Approx(0.610864).epsilon(1e-6));
}

TEST_CASE("tsallis loss direct substitution") {
  CHECK(tsallis_loss(probs({1.0, 0.0}), ClassIndex(0), psi(4.0)) ==
        doctest::Approx(0.0).epsilon(1e-5));
  CHECK(tsallis_loss(probs({0.7, 0.3}), ClassIndex(0), psi(2.0)) == doctest::Approx(0.3));
  CHECK(tsallis_loss(probs({0.7, 0.3}), ClassIndex(0), psi(3.0)) == doctest::Approx(0.255));
}

TEST_CASE("cross entropy analytic values") {
  CHECK(cross_entropy(probs({1.0, 0.0}), ClassIndex(0)) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(cross_entropy(probs({0.7, 0.3}), ClassIndex(0)) == doctest::Approx(0.356675).epsilon(1e-6));
  CHECK(cross_entropy(probs({0.5, 0.5}), ClassIndex(1)) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(cross_entropy(probs({0.5, 0.5}), ClassIndex(2)), std::domain_error);
}

TEST_CASE("gini impurity equals the psi = 2 entropy") {
  CHECK(gini_impurity(probs({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(gini_impurity(probs({0.5, 0.5})) == doctest::Approx(0.5));
  CHECK(gini_impurity(probs({0.7, 0.3})) == doctest::Approx(0.42));

  RngState rng(11);
  for (int i = 0; i < 200; ++i) {
    const PredictionProbs p = randomSimplex(rng, 2 + rng.uniformIndex(4));
    CHECK(std::abs(gini_impurity(p) - tsallis_entropy(p, psi(2.0))) < 1e-12);
  }
}

TEST_CASE("loss gradient in p: closed form and finite differences") {
  const Eigen::VectorXd g1 = tsallis_loss_grad_p(probs({0.7, 0.3}), ClassIndex(0), psi(2.0));
  CHECK(g1[0] == doctest::Approx(-1.0));
  CHECK(g1[1] == 0.0);

  const Eigen::VectorXd g2 = tsallis_loss_grad_p(probs({0.5, 0.5}), ClassIndex(1), psi(3.0));
  CHECK(g2[0] == 0.0);
  CHECK(g2[1] == doctest::Approx(-0.5));

  const Eigen::VectorXd g3 =
      tsallis_loss_grad_p(probs({0.9, 0.1}), ClassIndex(0), EntropyIndex(1.0 + 1e-6));
  CHECK(g3[0] == doctest::Approx(-1.0 / 0.9).epsilon(1e-4));
  CHECK(g3[1] == 0.0);

  // Component-wise check against the raw kernel, holding the other
  // components fixed (no renormalization).
  RngState rng(13);
  for (int i = 0; i < 200; ++i) {
    const PredictionProbs p = randomSimplex(rng, 2 + rng.uniformIndex(3), 0.05);
    const double s = randomPsi(rng);
    const auto y = ClassIndex(rng.uniformIndex(p.numClasses()));
    const double fd =
        fd_scalar([s](double pz) { return tsallis_loss_scalar(pz, s); }, p[y.get()], 1e-5);
    const double closed = tsallis_loss_grad_p(p, y, psi(s))[y.get()];
    CHECK(std::abs(fd - closed) / std::abs(closed) < 1e-5);
  }
}

TEST_CASE("loss gradient in psi: closed form and finite differences") {
  CHECK(tsallis_loss_grad_psi(probs({1.0, 0.0}), ClassIndex(0), psi(2.5)) ==
        doctest::Approx(0.0).epsilon(1e-5));
  CHECK(tsallis_loss_grad_psi(probs({0.7, 0.3}), ClassIndex(0), psi(2.0)) ==
        doctest::Approx(-0.0503275).epsilon(1e-5));
  CHECK_THROWS_AS(tsallis_loss_grad_psi(probs({0.7, 0.3}), ClassIndex(0), EntropyIndex(1.0 + 1e-6)),
                  std::domain_error);

  const PredictionProbs half = probs({0.5, 0.5});
  const double fd_half = fd_scalar(
      [&half](double s) { return tsallis_loss(half, ClassIndex(0), EntropyIndex(s)); }, 3.0, 1e-4);
  CHECK(std::abs(fd_half - tsallis_loss_grad_psi(half, ClassIndex(0), psi(3.0))) /
            std::abs(fd_half) <
        1e-6);

  RngState rng(17);
  for (int i = 0; i < 500; ++i) {
    const PredictionProbs p = randomSimplex(rng, 2 + rng.uniformIndex(3), 0.01);
    const double s = randomPsi(rng);
    const auto y = ClassIndex(rng.uniformIndex(p.numClasses()));
    const double fd = fd_scalar(
        [&p, y](double v) { return tsallis_loss(p, y, EntropyIndex(v)); }, s, 1e-4);
    const double closed = tsallis_loss_grad_psi(p, y, psi(s));
    CHECK(std::abs(fd - closed) / std::abs(closed) < 1e-5);
  }
}

TEST_CASE("entropy as expected loss under the prediction itself") {
  const PredictionProbs p = probs({0.7, 0.3});
  CHECK(entropy_via_expectation(p, psi(2.0)) == doctest::Approx(0.42));
  CHECK(entropy_via_expectation(p, psi(2.0)) ==
        doctest::Approx(tsallis_entropy(p, psi(2.0))).epsilon(1e-12));
  CHECK(entropy_via_expectation(probs({1.0, 0.0}), psi(3.0)) ==
        doctest::Approx(0.0).epsilon(1e-5));

  RngState rng(19);
  for (int i = 0; i < 1000; ++i) {
    const PredictionProbs q = randomSimplex(rng, 2 + rng.uniformIndex(4));
    const double s = 1.00001 + (10.0 - 1.00001) * rng.uniform();
    CHECK(std::abs(entropy_via_expectation(q, psi(s)) - tsallis_entropy(q, psi(s))) < 1e-10);
  }
}

TEST_CASE("entropy and loss are non-negative, zero only at vertices") {
  RngState rng(23);
  for (int i = 0; i < 300; ++i) {
    const PredictionProbs p = randomSimplex(rng, 2 + rng.uniformIndex(3), 0.01);
    const double s = randomPsi(rng, 1.1, 9.9);
    const auto y = ClassIndex(rng.uniformIndex(p.numClasses()));
    CHECK(tsallis_entropy(p, psi(s)) > 1e-5);
    CHECK(tsallis_loss(p, y, psi(s)) > 1e-6);
  }
  CHECK(tsallis_entropy(probs({1.0, 0.0}), psi(2.0)) < 1e-5);
  CHECK(tsallis_loss(probs({0.0, 1.0}), ClassIndex(1), psi(2.0)) < 1e-5);
}

TEST_CASE("entropy is concave on the simplex") {
  RngState rng(29);
  for (const double s : {1.5, 2.0, 3.0, 5.0}) {
    for (int i = 0; i < 100; ++i) {
      const Eigen::Index k = 2 + rng.uniformIndex(3);
      const PredictionProbs p = randomSimplex(rng, k);
      const PredictionProbs q = randomSimplex(rng, k);
      const double lambda = rng.uniform();
      const PredictionProbs mix(lambda * p.vec() + (1.0 - lambda) * q.vec());
      const double lhs = tsallis_entropy(mix, psi(s));
      const double rhs =
          lambda * tsallis_entropy(p, psi(s)) + (1.0 - lambda) * tsallis_entropy(q, psi(s));
      CHECK(lhs >= rhs - 1e-10);
    }
  }
}

TEST_CASE("limits toward psi = 1 recover gibbs entropy and cross-entropy") {
  RngState rng(31);
  for (int i = 0; i < 1000; ++i) {
    const PredictionProbs p = randomSimplex(rng, 2 + rng.uniformIndex(3), 0.01);
    const auto y = ClassIndex(rng.uniformIndex(p.numClasses()));
    const EntropyIndex near_one(1.0 + 1e-5);
    CHECK(std::abs(tsallis_entropy(p, near_one) - gibbs_entropy(p)) < 1e-4);
    CHECK(std::abs(tsallis_loss(p, y, near_one) - cross_entropy(p, y)) < 1e-4);
  }

  // The raw forms, without the fallback, obey the same limit; the gap
  // scales with log^2(p_min), so keep entries a notch higher.
  for (int i = 0; i < 1000; ++i) {
    const PredictionProbs p = randomSimplex(rng, 2 + rng.uniformIndex(3), 0.02);
    const auto y = ClassIndex(rng.uniformIndex(p.numClasses()));
    CHECK(std::abs(tsallis_entropy_expr(p.vec(), 1.0 + 1e-5) - gibbs_entropy(p)) < 1e-4);
    CHECK(std::abs(-std::expm1(1e-5 * std::log(p[y.get()])) / 1e-5 - cross_entropy(p, y)) < 1e-4);
  }
}

TEST_CASE("loss is continuous across the limit-fallback boundary") {
  const PredictionProbs p = probs({0.95, 0.05});
  const double below = tsallis_loss(p, ClassIndex(0), EntropyIndex(1.0 + kPsiLimitTol * 0.999));
  const double above = tsallis_loss(p, ClassIndex(0), EntropyIndex(1.0 + kPsiLimitTol * 1.001));
  CHECK(std::abs(below - above) < 1e-6);
}
