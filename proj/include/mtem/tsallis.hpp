#ifndef MTEM_TSALLIS_HPP
#define MTEM_TSALLIS_HPP

// Tsallis entropy/loss family with exact gradients in both the
// prediction and the entropy index. All quantities are evaluated in
// double precision; powers p^(psi-1) go through expm1/exp((psi-1)*log p)
// so the forms stay stable as psi approaches 1 and agree exactly with
// the gradient derivations.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "mtem/types.hpp"

namespace mtem {

// ---------------------------------------------------------------------------
// Raw kernels. Expression-friendly, no simplex validation; callers that
// need the checked contracts use the PredictionProbs overloads below.
// ---------------------------------------------------------------------------

/// (1 - p_z^(psi-1)) / (psi - 1), the per-instance Tsallis loss as a
/// function of the probability assigned to the labeled class.
inline double tsallis_loss_scalar(double p_z, double psi) {
  const double u = psi - 1.0;
  if (u < kPsiLimitTol) return -std::log(p_z);
  return -std::expm1(u * std::log(p_z)) / u;
}

inline double cross_entropy_scalar(double p_z) { return -std::log(p_z); }

/// d/dp_z of the Tsallis loss: -p_z^(psi-2).
inline double tsallis_loss_grad_p_scalar(double p_z, double psi) {
  return -std::exp((psi - 2.0) * std::log(p_z));
}

/// d/dpsi of the Tsallis loss, in the product form
/// (l_1 - l_psi)/(psi - 1) - l_1 * l_psi. Singular near psi = 1.
inline double tsallis_loss_grad_psi_scalar(double p_z, double psi) {
  const double l1 = cross_entropy_scalar(p_z);
  const double lpsi = tsallis_loss_scalar(p_z, psi);
  return (l1 - lpsi) / (psi - 1.0) - l1 * lpsi;
}

/// (1 - sum_j p_j^psi) / (psi - 1) over an Eigen expression.
template <typename Derived>
double tsallis_entropy_expr(const Eigen::MatrixBase<Derived>& p, double psi) {
  const double u = psi - 1.0;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double pj = p[j];
    if (pj > 0.0) acc += pj * std::expm1(u * std::log(pj));
  }
  return -acc / u;
}

/// -sum_j p_j log p_j with 0*log 0 treated as 0.
template <typename Derived>
double gibbs_entropy_expr(const Eigen::MatrixBase<Derived>& p) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double pj = p[j];
    if (pj > 0.0) acc -= pj * std::log(pj);
  }
  return acc;
}

template <typename Derived>
double gini_impurity_expr(const Eigen::MatrixBase<Derived>& p) {
  return 1.0 - p.squaredNorm();
}

// ---------------------------------------------------------------------------
// Checked operations on validated simplex points.
// ---------------------------------------------------------------------------

inline double tsallis_entropy(const PredictionProbs& p, const EntropyIndex& psi) {
  if (psi.value() - 1.0 < kPsiLimitTol) return gibbs_entropy_expr(p.vec());
  return tsallis_entropy_expr(p.vec(), psi.value());
}

inline double gibbs_entropy(const PredictionProbs& p) { return gibbs_entropy_expr(p.vec()); }

inline double tsallis_loss(const PredictionProbs& p, ClassIndex y, const EntropyIndex& psi) {
  y.require(p.numClasses());
  return tsallis_loss_scalar(p[y.get()], psi.value());
}

inline double cross_entropy(const PredictionProbs& p, ClassIndex y) {
  y.require(p.numClasses());
  return cross_entropy_scalar(p[y.get()]);
}

/// 1 - sum_j p_j^2; coincides with the Tsallis entropy at psi = 2.
inline double gini_impurity(const PredictionProbs& p) { return gini_impurity_expr(p.vec()); }

/// Gradient of the Tsallis loss in the prediction: the y-th entry is
/// -p_y^(psi-2), all others are 0.
inline Eigen::VectorXd tsallis_loss_grad_p(const PredictionProbs& p, ClassIndex y,
                                           const EntropyIndex& psi) {
  y.require(p.numClasses());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p.numClasses());
  g[y.get()] = tsallis_loss_grad_p_scalar(p[y.get()], psi.value());
  return g;
}

/// Gradient of the Tsallis loss in the entropy index. The closed form
/// is singular at psi = 1; callers must stay clear of that region.
inline double tsallis_loss_grad_psi(const PredictionProbs& p, ClassIndex y,
                                    const EntropyIndex& psi) {
  y.require(p.numClasses());
  if (psi.value() - 1.0 < kPsiLimitTol) {
    throw std::domain_error("tsallis_loss_grad_psi: psi too close to 1");
  }
  return tsallis_loss_grad_psi_scalar(p[y.get()], psi.value());
}

/// sum_k p_k * loss(p, k, psi): the Tsallis entropy written as the
/// expected Tsallis loss under labels drawn from p itself.
inline double entropy_via_expectation(const PredictionProbs& p, const EntropyIndex& psi) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.numClasses(); ++k) {
    acc += p[k] * tsallis_loss_scalar(p[k], psi.value());
  }
  return acc;
}

}  // namespace mtem

#endif  // MTEM_TSALLIS_HPP
