#ifndef MTEM_TYPES_HPP
#define MTEM_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace mtem {

/// Probabilities below this floor are clamped up before any loss or
/// gradient evaluation; keeps log(p) and p^(psi-2) finite for psi < 2.
inline constexpr double kProbFloor = 1e-7;

/// Simplex validity: entries must sum to 1 within this tolerance.
inline constexpr double kSimplexSumTol = 1e-9;

/// Entropy indexes closer than this to 1 switch the Tsallis forms to
/// their analytic limits (Gibbs entropy / cross-entropy).
inline constexpr double kPsiLimitTol = 1e-4;

/// Default upper bound for entropy indexes.
inline constexpr double kDefaultPsiMax = 10.0;

/// A point on the K-class probability simplex. Construction clamps
/// entries to [kProbFloor, 1] and renormalizes, so every entry of a
/// live object is strictly positive.
class PredictionProbs {
 public:
  explicit PredictionProbs(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) {
      throw std::domain_error("PredictionProbs: need at least 2 classes");
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < probs_.size(); ++j) {
      const double p = probs_[j];
      if (!std::isfinite(p) || p < 0.0) {
        throw std::domain_error("PredictionProbs: entries must be finite and non-negative");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSimplexSumTol) {
      throw std::domain_error("PredictionProbs: entries must sum to 1");
    }
    probs_ = probs_.cwiseMax(kProbFloor);
    probs_ /= probs_.sum();
  }

  const Eigen::VectorXd& vec() const noexcept { return probs_; }
  Eigen::Index numClasses() const noexcept { return probs_.size(); }
  double operator[](Eigen::Index j) const { return probs_[j]; }

 private:
  Eigen::VectorXd probs_;
};

/// A Tsallis entropy index; strictly greater than 1 and bounded above.
class EntropyIndex {
 public:
  explicit EntropyIndex(double value, double max_value = kDefaultPsiMax) : value_(value) {
    if (!std::isfinite(value_) || value_ <= 1.0) {
      throw std::domain_error("EntropyIndex: value must be finite and > 1");
    }
    if (value_ > max_value) {
      throw std::domain_error("EntropyIndex: value exceeds configured maximum");
    }
  }

  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Index of the non-zero element of a one-hot label.
class ClassIndex {
 public:
  explicit ClassIndex(Eigen::Index z) : z_(z) {
    if (z_ < 0) throw std::domain_error("ClassIndex: must be non-negative");
  }

  Eigen::Index get() const noexcept { return z_; }

  /// Throws unless the index addresses one of `num_classes` classes.
  void require(Eigen::Index num_classes) const {
    if (z_ >= num_classes) {
      throw std::domain_error("ClassIndex: out of range for the class count");
    }
  }

  friend bool operator==(ClassIndex a, ClassIndex b) noexcept { return a.z_ == b.z_; }

 private:
  Eigen::Index z_;
};

}  // namespace mtem

#endif  // MTEM_TYPES_HPP
