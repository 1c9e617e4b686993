#include "mtem/meta.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mtem/tsallis.hpp"

namespace mtem {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<TsallisBatchItem> withIndexes(std::span<const PseudoItem> batch,
                                          const EntropyIndexTable& psi) {
  std::vector<TsallisBatchItem> items;
  items.reserve(batch.size());
  for (const PseudoItem& item : batch) {
    if (item.instance_id < 0 || item.instance_id >= psi.size()) {
      throw std::out_of_range("entropy index table has no entry for a batch instance");
    }
    items.push_back({item.features, item.pseudo_label, psi.at(item.instance_id)});
  }
  return items;
}

std::vector<TsallisBatchItem> withFixedIndex(std::span<const PseudoItem> batch,
                                             const EntropyIndex& alpha) {
  std::vector<TsallisBatchItem> items;
  items.reserve(batch.size());
  for (const PseudoItem& item : batch) items.push_back({item.features, item.pseudo_label, alpha});
  return items;
}

std::vector<LabeledItem> labeledItems(std::span<const Instance* const> instances) {
  std::vector<LabeledItem> items;
  items.reserve(instances.size());
  for (const Instance* inst : instances) {
    if (!inst->label) throw std::invalid_argument("labeled batch contains unlabeled instance");
    items.push_back({&inst->features, *inst->label});
  }
  return items;
}

/// Taylor quotient with the validation gradient already in hand.
PsiGradientMap taylorFromValidGrad(const ParameterVector& theta,
                                   std::span<const PseudoItem> batch,
                                   const EntropyIndexTable& psi, double eta,
                                   const ParameterGradient& valid_grad, double eps_rule_scale) {
  PsiGradientMap grads;
  const double grad_norm = valid_grad.flat().norm();
  if (grad_norm == 0.0) {
    for (const PseudoItem& item : batch) grads[item.instance_id] = 0.0;
    return grads;
  }
  const double eps = eps_rule_scale / grad_norm;
  const ParameterVector theta_plus = perturb(theta, valid_grad, eps);
  const ParameterVector theta_minus = perturb(theta, valid_grad, -eps);

  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const PseudoItem& item : batch) {
    const EntropyIndex psi_i = psi.at(item.instance_id);
    const PredictionProbs p_plus = predict(theta_plus, *item.features, 1.0);
    const PredictionProbs p_minus = predict(theta_minus, *item.features, 1.0);
    const double g_plus = scale * tsallis_loss_grad_psi(p_plus, item.pseudo_label, psi_i);
    const double g_minus = scale * tsallis_loss_grad_psi(p_minus, item.pseudo_label, psi_i);
    grads[item.instance_id] += -eta * (g_plus - g_minus) / (2.0 * eps);
  }
  return grads;
}

struct SplitRngs {
  RngState source_batch;
  RngState target_batch;
  RngState label_sampler;

  explicit SplitRngs(std::uint64_t seed)
      : source_batch(seed + seed_offsets::kSourceBatch),
        target_batch(seed + seed_offsets::kTargetBatch),
        label_sampler(seed + seed_offsets::kLabelSampler) {}
};

void requireLabeledSource(const Dataset& source) {
  if (source.empty()) throw std::invalid_argument("source dataset is empty");
  if (!source.fullyLabeled()) throw std::invalid_argument("source dataset must be labeled");
}

}  // namespace

EntropyIndexTable::EntropyIndexTable(Eigen::Index size, double init, double delta_psi,
                                     double psi_max)
    : values_(Eigen::VectorXd::Constant(size, init)),
      min_value_(1.0 + delta_psi),
      max_value_(psi_max) {
  if (size < 1) throw std::invalid_argument("EntropyIndexTable: size must be positive");
  if (!(delta_psi > 0.0)) throw std::invalid_argument("EntropyIndexTable: delta_psi must be positive");
  if (!(psi_max > min_value_)) throw std::invalid_argument("EntropyIndexTable: psi_max too small");
  if (init < min_value_ || init > psi_max) {
    throw std::invalid_argument("EntropyIndexTable: init outside [1 + delta_psi, psi_max]");
  }
}

void EntropyIndexTable::set(Eigen::Index id, double value) {
  if (id < 0 || id >= values_.size()) throw std::out_of_range("EntropyIndexTable::set: bad id");
  if (value < min_value_ || value > max_value_) {
    throw std::domain_error("EntropyIndexTable::set: value exits the valid region");
  }
  values_[id] = value;
}

double lr_eta(int t, double k1) {
  if (t < 1) throw std::invalid_argument("lr_eta: t must be at least 1");
  return std::min(1.0, k1 / static_cast<double>(t));
}

double lr_beta(int t, double k2, double beta_max) {
  if (t < 1) throw std::invalid_argument("lr_beta: t must be at least 1");
  return std::min(beta_max, k2 * std::pow(static_cast<double>(t), -2.0 / 3.0));
}

ParameterVector inner_virtual_update(const ParameterVector& theta,
                                     std::span<const PseudoItem> batch,
                                     const EntropyIndexTable& psi, double eta) {
  if (eta < 0.0) throw std::invalid_argument("inner_virtual_update: eta must be non-negative");
  const auto items = withIndexes(batch, psi);
  return sgd_step(theta, grad_theta_tsallis_batch(theta, items).grad, eta);
}

PsiGradientMap hypergrad_psi_taylor(const ParameterVector& theta,
                                    std::span<const PseudoItem> batch,
                                    std::span<const LabeledItem> valid,
                                    const EntropyIndexTable& psi, double eta,
                                    double eps_rule_scale) {
  if (valid.empty()) throw std::invalid_argument("hypergrad_psi_taylor: empty validation batch");
  const ParameterVector theta_hat = inner_virtual_update(theta, batch, psi, eta);
  const ParameterGradient valid_grad = grad_theta_supervised_batch(theta_hat, valid).grad;
  return taylorFromValidGrad(theta, batch, psi, eta, valid_grad, eps_rule_scale);
}

EntropyIndexTable outer_update_psi(const EntropyIndexTable& psi, const PsiGradientMap& grads,
                                   double beta) {
  if (beta < 0.0) throw std::invalid_argument("outer_update_psi: beta must be non-negative");
  EntropyIndexTable next = psi;
  for (const auto& [id, grad] : grads) {
    const double updated = psi.value(id) - beta * grad;
    next.set(id, std::clamp(updated, psi.minAllowed(), psi.maxAllowed()));
  }
  return next;
}

ParameterVector actual_update_theta(const ParameterVector& theta,
                                    std::span<const PseudoItem> batch,
                                    const EntropyIndexTable& psi_next, double eta) {
  return inner_virtual_update(theta, batch, psi_next, eta);
}

TrainResult mtem_train(const MtemConfig& config, const Dataset& source, const Dataset& target,
                       const ParameterVector& params0) {
  requireLabeledSource(source);
  if (target.size() < config.batch_size_target) {
    throw std::invalid_argument("mtem_train: target smaller than the batch size");
  }

  EntropyIndexTable psi(target.size(), config.psi_init, config.delta_psi, config.psi_max);
  TrainResult result{params0, psi, {}};
  if (config.t_max == 0) return result;

  const TemperatureSchedule temp = config.temperatureSchedule();
  SplitRngs rngs(config.seed);
  ParameterVector theta = params0;
  result.trace.reserve(config.t_max);

  for (int t = 1; t <= config.t_max; ++t) {
    try {
      const auto target_batch = sample_batch(target, config.batch_size_target, rngs.target_batch);
      const auto valid_batch = sample_batch(source, config.batch_size_valid, rngs.source_batch);
      const auto valid_items = labeledItems(valid_batch);
      const double kappa = temperature_at(temp, t);
      const double eta = lr_eta(t, config.schedules.k1);
      const double beta = lr_beta(t, config.schedules.k2, config.schedules.beta_max);

      // Pseudo-labels are sampled once per step at the annealed temperature
      // and reused by both parameter updates.
      std::vector<PseudoItem> batch;
      batch.reserve(target_batch.size());
      for (const Instance* inst : target_batch) {
        const PredictionProbs p = predict(theta, inst->features, kappa);
        batch.push_back({inst->id, &inst->features, sample_pseudo_label(p, rngs.label_sampler)});
      }

      const BatchLossGrad inner = grad_theta_tsallis_batch(theta, withIndexes(batch, psi));
      const ParameterVector theta_hat = sgd_step(theta, inner.grad, eta);
      const BatchLossGrad valid = grad_theta_supervised_batch(theta_hat, valid_items);

      double grad_psi_sq = 0.0;
      EntropyIndexTable psi_next = psi;
      if (config.meta_enabled) {
        const PsiGradientMap grads =
            taylorFromValidGrad(theta, batch, psi, eta, valid.grad, config.eps_rule_scale);
        for (const auto& [id, g] : grads) grad_psi_sq += g * g;
        psi_next = outer_update_psi(psi, grads, beta);
      }

      const BatchLossGrad actual = grad_theta_tsallis_batch(theta, withIndexes(batch, psi_next));
      theta = sgd_step(theta, actual.grad, eta);
      psi = psi_next;

      result.trace.push_back({t, eta, beta, kappa, actual.loss, valid.loss, grad_psi_sq,
                              actual.grad.flat().squaredNorm(), psi.mean(), psi.min(), psi.max()});
    } catch (const std::exception& e) {
      throw std::runtime_error("mtem_train: step " + std::to_string(t) + ": " + e.what());
    }
  }

  result.params = theta;
  result.psi = psi;
  return result;
}

TrainResult self_train_baseline(const MtemConfig& config, const Dataset& source,
                                const Dataset& target, const ParameterVector& params0,
                                SelfTrainMode mode, double fixed_alpha) {
  requireLabeledSource(source);
  if (target.size() < config.batch_size_target) {
    throw std::invalid_argument("self_train_baseline: target smaller than the batch size");
  }
  const bool tsallis_mode = mode == SelfTrainMode::kFixedTsallis;
  // The fixed index bypasses the learnable table; it only needs to be a
  // valid Tsallis index (> 1), not inside the table's clamp range.
  const EntropyIndex alpha(tsallis_mode ? fixed_alpha : 2.0, kDefaultPsiMax);

  EntropyIndexTable psi(target.size(), config.psi_init, config.delta_psi, config.psi_max);
  TrainResult result{params0, psi, {}};
  if (config.t_max == 0) return result;

  const TemperatureSchedule temp = config.temperatureSchedule();
  SplitRngs rngs(config.seed);
  ParameterVector theta = params0;
  result.trace.reserve(config.t_max);

  const double psi_logged = tsallis_mode ? fixed_alpha : kNan;

  for (int t = 1; t <= config.t_max; ++t) {
    const auto source_batch = sample_batch(source, config.batch_size_valid, rngs.source_batch);
    const BatchLossGrad sup = grad_theta_supervised_batch(theta, labeledItems(source_batch));
    const double eta = lr_eta(t, config.schedules.k1);
    const double kappa = tsallis_mode ? temperature_at(temp, t) : 1.0;

    double loss_t = kNan;
    ParameterGradient step_grad = sup.grad;
    if (config.lambda != 0.0) {
      const auto target_batch = sample_batch(target, config.batch_size_target, rngs.target_batch);
      std::vector<PseudoItem> batch;
      batch.reserve(target_batch.size());
      for (const Instance* inst : target_batch) {
        const PredictionProbs p = predict(theta, inst->features, kappa);
        const ClassIndex label = tsallis_mode ? sample_pseudo_label(p, rngs.label_sampler)
                                              : greedy_pseudo_label(p);
        batch.push_back({inst->id, &inst->features, label});
      }
      BatchLossGrad tgt{0.0, ParameterGradient(theta.numClasses(), theta.dim())};
      if (tsallis_mode) {
        tgt = grad_theta_tsallis_batch(theta, withFixedIndex(batch, alpha));
      } else {
        std::vector<LabeledItem> pseudo_items;
        pseudo_items.reserve(batch.size());
        for (const PseudoItem& item : batch) pseudo_items.push_back({item.features, item.pseudo_label});
        tgt = grad_theta_supervised_batch(theta, pseudo_items);
      }
      loss_t = tgt.loss;
      step_grad.flat() += config.lambda * tgt.grad.flat();
    }

    theta = sgd_step(theta, step_grad, eta);
    result.trace.push_back({t, eta, 0.0, kappa, loss_t, sup.loss, kNan,
                            step_grad.flat().squaredNorm(), psi_logged, psi_logged, psi_logged});
  }

  result.params = theta;
  return result;
}

TrainResult source_only_train(const MtemConfig& config, const Dataset& source,
                              const ParameterVector& params0) {
  requireLabeledSource(source);
  EntropyIndexTable psi(1, config.psi_init, config.delta_psi, config.psi_max);
  TrainResult result{params0, psi, {}};
  if (config.t_max == 0) return result;

  SplitRngs rngs(config.seed);
  ParameterVector theta = params0;
  result.trace.reserve(config.t_max);

  for (int t = 1; t <= config.t_max; ++t) {
    const auto batch = sample_batch(source, config.batch_size_valid, rngs.source_batch);
    const BatchLossGrad sup = grad_theta_supervised_batch(theta, labeledItems(batch));
    const double eta = lr_eta(t, config.schedules.k1);
    theta = sgd_step(theta, sup.grad, eta);
    result.trace.push_back({t, eta, 0.0, 1.0, kNan, sup.loss, kNan,
                            sup.grad.flat().squaredNorm(), kNan, kNan, kNan});
  }

  result.params = theta;
  return result;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const StepRecord> trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
  out << "t,eta,beta,kappa,loss_t,loss_s,grad_psi_sq,grad_theta_sq,psi_mean,psi_min,psi_max\n";
  out.precision(17);
  for (const StepRecord& r : trace) {
    out << r.t << ',' << r.eta << ',' << r.beta << ',' << r.kappa << ',' << r.loss_t << ','
        << r.loss_s << ',' << r.grad_psi_sq << ',' << r.grad_theta_sq << ',' << r.psi_mean << ','
        << r.psi_min << ',' << r.psi_max << '\n';
  }
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path.string());
}

}  // namespace mtem
