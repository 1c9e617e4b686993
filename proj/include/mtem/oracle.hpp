#ifndef MTEM_ORACLE_HPP
#define MTEM_ORACLE_HPP

// Brute-force differentiation oracles. Deliberately dumb: everything is
// a central difference through the full evaluation pipeline, independent
// of the closed forms they validate.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <set>
#include <span>
#include <stdexcept>

#include "mtem/meta.hpp"
#include "mtem/model.hpp"

namespace mtem {

struct GradComparison {
  double cosine_similarity;
  double max_relative_error;
  double max_absolute_error;
};

/// [f(x0 + h) - f(x0 - h)] / (2h).
template <typename F>
double fd_scalar(F&& f, double x0, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_scalar: h must be positive");
  const double hi = f(x0 + h);
  const double lo = f(x0 - h);
  if (!std::isfinite(hi) || !std::isfinite(lo)) {
    throw std::domain_error("fd_scalar: non-finite function evaluation");
  }
  return (hi - lo) / (2.0 * h);
}

/// Per-coordinate central differences over the flat parameter view.
template <typename LossFn>
ParameterGradient fd_grad_theta(LossFn&& loss, const ParameterVector& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_grad_theta: h must be positive");
  ParameterGradient grad(theta.numClasses(), theta.dim());
  ParameterVector probe = theta;
  for (Eigen::Index i = 0; i < probe.flat().size(); ++i) {
    const double original = probe.flat()[i];
    probe.flat()[i] = original + h;
    const double hi = loss(probe);
    probe.flat()[i] = original - h;
    const double lo = loss(probe);
    probe.flat()[i] = original;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw std::domain_error("fd_grad_theta: non-finite loss evaluation");
    }
    grad.flat()[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

/// The exact hypergradient of the validation loss in each batch
/// instance's entropy index, obtained without any approximation by
/// perturbing the index through the whole inner update.
inline PsiGradientMap exact_hypergrad_psi_fd(const ParameterVector& theta,
                                             std::span<const PseudoItem> batch,
                                             std::span<const LabeledItem> valid,
                                             const EntropyIndexTable& psi, double eta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("exact_hypergrad_psi_fd: h must be positive");
  if (valid.empty()) throw std::invalid_argument("exact_hypergrad_psi_fd: empty validation batch");

  std::set<Eigen::Index> ids;
  for (const PseudoItem& item : batch) ids.insert(item.instance_id);

  PsiGradientMap grads;
  for (const Eigen::Index id : ids) {
    EntropyIndexTable plus = psi;
    EntropyIndexTable minus = psi;
    plus.set(id, psi.value(id) + h);    // throws if the perturbation
    minus.set(id, psi.value(id) - h);   // exits the valid region
    const ParameterVector theta_plus = inner_virtual_update(theta, batch, plus, eta);
    const ParameterVector theta_minus = inner_virtual_update(theta, batch, minus, eta);
    const double loss_plus = grad_theta_supervised_batch(theta_plus, valid).loss;
    const double loss_minus = grad_theta_supervised_batch(theta_minus, valid).loss;
    grads[id] = (loss_plus - loss_minus) / (2.0 * h);
  }
  return grads;
}

/// Cosine over flattened values (1 when both are zero), max relative
/// error over coordinates with |a| > 1e-8, max absolute error.
inline GradComparison compare(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compare: shape mismatch");
  GradComparison out{1.0, 0.0, 0.0};
  const double na = a.norm();
  const double nb = b.norm();
  if (na > 0.0 && nb > 0.0) {
    out.cosine_similarity = a.dot(b) / (na * nb);
  } else if (na > 0.0 || nb > 0.0) {
    out.cosine_similarity = 0.0;
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double abs_err = std::abs(a[i] - b[i]);
    out.max_absolute_error = std::max(out.max_absolute_error, abs_err);
    if (std::abs(a[i]) > 1e-8) {
      out.max_relative_error = std::max(out.max_relative_error, abs_err / std::abs(a[i]));
    }
  }
  return out;
}

inline GradComparison compare(const ParameterGradient& a, const ParameterGradient& b) {
  if (!a.sameShape(b)) throw std::invalid_argument("compare: shape mismatch");
  return compare(a.flat(), b.flat());
}

inline GradComparison compare(const PsiGradientMap& a, const PsiGradientMap& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compare: shape mismatch");
  Eigen::VectorXd va(static_cast<Eigen::Index>(a.size()));
  Eigen::VectorXd vb(static_cast<Eigen::Index>(b.size()));
  Eigen::Index i = 0;
  auto ita = a.begin();
  auto itb = b.begin();
  for (; ita != a.end(); ++ita, ++itb, ++i) {
    if (ita->first != itb->first) throw std::invalid_argument("compare: key mismatch");
    va[i] = ita->second;
    vb[i] = itb->second;
  }
  return compare(va, vb);
}

}  // namespace mtem

#endif  // MTEM_ORACLE_HPP
