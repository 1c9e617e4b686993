#ifndef MTEM_META_HPP
#define MTEM_META_HPP

// The bilevel training loop: inner virtual update on pseudo-labeled
// target batches, first-order Taylor hypergradient for the per-instance
// entropy indexes, outer index update, and the committed parameter
// update. Baseline trainers (joint self-training, source-only) share the
// same building blocks.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "mtem/data.hpp"
#include "mtem/model.hpp"
#include "mtem/sampler.hpp"
#include "mtem/types.hpp"

namespace mtem {

/// Learnable per-target-instance entropy indexes, clamped to
/// [1 + delta_psi, psi_max] at all times.
class EntropyIndexTable {
 public:
  EntropyIndexTable(Eigen::Index size, double init, double delta_psi, double psi_max);

  Eigen::Index size() const noexcept { return values_.size(); }
  double value(Eigen::Index id) const { return values_[id]; }
  EntropyIndex at(Eigen::Index id) const { return EntropyIndex(values_[id], max_value_); }

  double minAllowed() const noexcept { return min_value_; }
  double maxAllowed() const noexcept { return max_value_; }

  /// Overwrites one entry; throws if the value exits [min, max].
  void set(Eigen::Index id, double value);

  double mean() const { return values_.mean(); }
  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }
  const Eigen::VectorXd& values() const noexcept { return values_; }

 private:
  Eigen::VectorXd values_;
  double min_value_;
  double max_value_;
};

/// Hypergradient of the validation loss in the entropy indexes; only
/// instances of the current batch carry entries.
using PsiGradientMap = std::map<Eigen::Index, double>;

/// eta_t = min(1, k1/t) and beta_t = min(beta_max, k2 * t^(-2/3)).
struct LearningRateSchedules {
  double k1 = 5.0;
  double k2 = 0.1;
  double beta_max = 0.1;
};

double lr_eta(int t, double k1);
double lr_beta(int t, double k2, double beta_max);

struct MtemConfig {
  LearningRateSchedules schedules;
  double psi_init = 2.0;
  double delta_psi = 1e-3;
  double psi_max = kDefaultPsiMax;
  double kappa_max = 5.0;
  double kappa_min = 1.0;
  double anneal_s = 10.0;
  int batch_size_target = 8;
  int batch_size_valid = 8;
  int t_max = 2000;
  double eps_rule_scale = 0.01;
  std::uint64_t seed = 0;
  /// Weight of the target loss in the joint baseline objective.
  double lambda = 1.0;
  /// When false the entropy indexes stay at psi_init (ablation).
  bool meta_enabled = true;

  TemperatureSchedule temperatureSchedule() const {
    return TemperatureSchedule(kappa_max, kappa_min, anneal_s, t_max > 0 ? t_max : 1);
  }
};

/// One pseudo-labeled batch entry; the entropy index is looked up in the
/// table by instance id.
struct PseudoItem {
  Eigen::Index instance_id;
  const SparseFeatures* features;
  ClassIndex pseudo_label;
};

struct StepRecord {
  int t;
  double eta;
  double beta;
  double kappa;
  double loss_t;
  double loss_s;
  double grad_psi_sq;
  double grad_theta_sq;
  double psi_mean;
  double psi_min;
  double psi_max;
};

struct TrainResult {
  ParameterVector params;
  EntropyIndexTable psi;
  std::vector<StepRecord> trace;
};

/// theta_hat = theta - eta * grad L_T(theta, psi | batch).
ParameterVector inner_virtual_update(const ParameterVector& theta,
                                     std::span<const PseudoItem> batch,
                                     const EntropyIndexTable& psi, double eta);

/// First-order Taylor approximation of d L_S(theta_hat(psi) | valid) /
/// d psi_i for every instance of the batch, using each instance's frozen
/// pseudo-label. Returns the zero map when the validation gradient
/// vanishes.
PsiGradientMap hypergrad_psi_taylor(const ParameterVector& theta,
                                    std::span<const PseudoItem> batch,
                                    std::span<const LabeledItem> valid,
                                    const EntropyIndexTable& psi, double eta,
                                    double eps_rule_scale);

/// psi_i <- clamp(psi_i - beta * grads[i]); entries absent from the map
/// are unchanged.
EntropyIndexTable outer_update_psi(const EntropyIndexTable& psi, const PsiGradientMap& grads,
                                   double beta);

/// Same computation as inner_virtual_update, run with the updated index
/// table and the same frozen pseudo-labels.
ParameterVector actual_update_theta(const ParameterVector& theta,
                                    std::span<const PseudoItem> batch,
                                    const EntropyIndexTable& psi_next, double eta);

/// The full meta-training loop, deterministic in config.seed.
TrainResult mtem_train(const MtemConfig& config, const Dataset& source, const Dataset& target,
                       const ParameterVector& params0);

enum class SelfTrainMode {
  kGibbsGreedy,    // cross-entropy on greedy pseudo-labels
  kFixedTsallis,   // single fixed entropy index, annealed sampling
};

/// Joint SGD on L_S + lambda * L_T over mixed batches.
TrainResult self_train_baseline(const MtemConfig& config, const Dataset& source,
                                const Dataset& target, const ParameterVector& params0,
                                SelfTrainMode mode, double fixed_alpha = 2.0);

/// Plain SGD on the supervised source loss.
TrainResult source_only_train(const MtemConfig& config, const Dataset& source,
                              const ParameterVector& params0);

/// Trace CSV schema: t, eta, beta, kappa, loss_t, loss_s, grad_psi_sq,
/// grad_theta_sq, psi_mean, psi_min, psi_max.
void write_trace_csv(const std::filesystem::path& path, std::span<const StepRecord> trace);

namespace seed_offsets {
// All randomness flows from one master seed, split per consumer.
inline constexpr std::uint64_t kSourceBatch = 1;
inline constexpr std::uint64_t kTargetBatch = 2;
inline constexpr std::uint64_t kLabelSampler = 3;
inline constexpr std::uint64_t kParamInit = 4;
}  // namespace seed_offsets

}  // namespace mtem

#endif  // MTEM_META_HPP
