#ifndef MTEM_TESTS_TEST_UTIL_HPP
#define MTEM_TESTS_TEST_UTIL_HPP

#include <Eigen/Dense>

#include <initializer_list>
#include <utility>
#include <vector>

#include "mtem/model.hpp"
#include "mtem/rng.hpp"
#include "mtem/types.hpp"

namespace mtem::test {

inline PredictionProbs probs(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const double x : values) v[i++] = x;
  return PredictionProbs(v);
}

/// Uniform draw from the simplex interior (Dirichlet(1) via exponential
/// spacings), resampled until every entry clears `min_entry`.
inline PredictionProbs randomSimplex(RngState& rng, Eigen::Index k, double min_entry = 0.0) {
  while (true) {
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      v[i] = -std::log(u);
    }
    v /= v.sum();
    if (min_entry <= 0.0 || v.minCoeff() >= min_entry) return PredictionProbs(v);
  }
}

inline SparseFeatures randomFeatures(RngState& rng, Eigen::Index d, double density = 0.5) {
  std::vector<std::pair<Eigen::Index, double>> pairs;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (rng.uniform() < density) pairs.emplace_back(i, rng.gaussian());
  }
  if (pairs.empty()) pairs.emplace_back(0, 1.0);
  return SparseFeatures::fromPairs(d, pairs);
}

inline ParameterVector randomParams(RngState& rng, Eigen::Index k, Eigen::Index d,
                                    double scale = 0.1) {
  ParameterVector params(k, d);
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) params.flat()[i] = scale * rng.gaussian();
  return params;
}

}  // namespace mtem::test

#endif  // MTEM_TESTS_TEST_UTIL_HPP
