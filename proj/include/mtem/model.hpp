#ifndef MTEM_MODEL_HPP
#define MTEM_MODEL_HPP

// Linear softmax classifier over sparse features with a hand-written
// backward pass. Parameters live in one flat vector (weights followed by
// biases) so the training loop can treat them with plain vector
// arithmetic while matrix views stay available for the forward pass.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mtem/types.hpp"

namespace mtem {

/// Sparse input features: strictly increasing indices, no duplicates.
class SparseFeatures {
 public:
  explicit SparseFeatures(Eigen::Index dim);

  /// Builds from (index, value) pairs; validates ordering and range.
  static SparseFeatures fromPairs(Eigen::Index dim,
                                  std::span<const std::pair<Eigen::Index, double>> pairs);

  const Eigen::SparseVector<double>& vec() const noexcept { return vec_; }
  Eigen::Index dim() const noexcept { return vec_.size(); }
  Eigen::Index nonZeros() const noexcept { return vec_.nonZeros(); }
  double norm() const { return vec_.norm(); }

 private:
  Eigen::SparseVector<double> vec_;
};

/// Flat classifier parameters: K x d weights (column-major) followed by
/// K biases, viewable as one vector of length K*d + K.
class ParameterVector {
 public:
  ParameterVector(Eigen::Index k, Eigen::Index d);

  Eigen::Index numClasses() const noexcept { return k_; }
  Eigen::Index dim() const noexcept { return d_; }

  Eigen::Map<Eigen::MatrixXd> weights() {
    return Eigen::Map<Eigen::MatrixXd>(flat_.data(), k_, d_);
  }
  Eigen::Map<const Eigen::MatrixXd> weights() const {
    return Eigen::Map<const Eigen::MatrixXd>(flat_.data(), k_, d_);
  }
  Eigen::VectorBlock<Eigen::VectorXd> biases() { return flat_.tail(k_); }
  Eigen::VectorBlock<const Eigen::VectorXd> biases() const {
    return const_cast<const Eigen::VectorXd&>(flat_).tail(k_);
  }

  Eigen::VectorXd& flat() noexcept { return flat_; }
  const Eigen::VectorXd& flat() const noexcept { return flat_; }

  bool sameShape(const ParameterVector& other) const noexcept {
    return k_ == other.k_ && d_ == other.d_;
  }

 private:
  Eigen::Index k_, d_;
  Eigen::VectorXd flat_;
};

/// Gradients share the parameter layout exactly.
using ParameterGradient = ParameterVector;

/// One pseudo-labeled instance with its entropy index.
struct TsallisBatchItem {
  const SparseFeatures* features;
  ClassIndex pseudo_label;
  EntropyIndex psi;
};

/// One labeled instance.
struct LabeledItem {
  const SparseFeatures* features;
  ClassIndex label;
};

struct BatchLossGrad {
  double loss;
  ParameterGradient grad;
};

/// W*x + b.
Eigen::VectorXd scores(const ParameterVector& params, const SparseFeatures& x);

/// softmax(scores / kappa), max-subtracted, floored and renormalized.
PredictionProbs predict(const ParameterVector& params, const SparseFeatures& x, double kappa);

/// Pulls a gradient in prediction space back to parameter space through
/// the temperature softmax Jacobian.
ParameterGradient backward(const ParameterVector& params, const SparseFeatures& x,
                           const Eigen::VectorXd& dl_dp, double kappa);

/// Mean Tsallis loss over pseudo-labeled instances and its exact
/// parameter gradient (kappa = 1).
BatchLossGrad grad_theta_tsallis_batch(const ParameterVector& params,
                                       std::span<const TsallisBatchItem> batch);

/// Mean cross-entropy over labeled instances and its exact gradient.
BatchLossGrad grad_theta_supervised_batch(const ParameterVector& params,
                                          std::span<const LabeledItem> batch);

/// params - lr * grad.
ParameterVector sgd_step(const ParameterVector& params, const ParameterGradient& grad, double lr);

/// params + eps * direction.
ParameterVector perturb(const ParameterVector& params, const ParameterGradient& direction,
                        double eps);

/// Gaussian init, mean 0, std 0.01, deterministic in the seed.
ParameterVector init_params(Eigen::Index k, Eigen::Index d, std::uint64_t seed);

/// Checkpoint format: 8-byte magic "MTEMCKPT", K and d as little-endian
/// uint32, then the flat parameter vector as little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const ParameterVector& params);
ParameterVector load_checkpoint(const std::filesystem::path& path);

}  // namespace mtem

#endif  // MTEM_MODEL_HPP
