#include "mtem/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "mtem/rng.hpp"
#include "mtem/tsallis.hpp"

namespace mtem {

namespace {

void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

constexpr char kCheckpointMagic[8] = {'M', 'T', 'E', 'M', 'C', 'K', 'P', 'T'};

}  // namespace

SparseFeatures::SparseFeatures(Eigen::Index dim) : vec_(dim) {
  if (dim < 1) throw std::invalid_argument("SparseFeatures: dimension must be positive");
}

SparseFeatures SparseFeatures::fromPairs(
    Eigen::Index dim, std::span<const std::pair<Eigen::Index, double>> pairs) {
  SparseFeatures out(dim);
  out.vec_.reserve(static_cast<Eigen::Index>(pairs.size()));
  Eigen::Index prev = -1;
  for (const auto& [idx, value] : pairs) {
    if (idx < 0 || idx >= dim) {
      throw std::invalid_argument("SparseFeatures: index " + std::to_string(idx) +
                                  " out of range for dimension " + std::to_string(dim));
    }
    if (idx <= prev) {
      throw std::invalid_argument("SparseFeatures: indices must be strictly increasing");
    }
    out.vec_.insertBack(idx) = value;
    prev = idx;
  }
  return out;
}

ParameterVector::ParameterVector(Eigen::Index k, Eigen::Index d)
    : k_(k), d_(d), flat_(Eigen::VectorXd::Zero(k * d + k)) {
  if (k < 2 || d < 1) throw std::invalid_argument("ParameterVector: need k >= 2 and d >= 1");
}

Eigen::VectorXd scores(const ParameterVector& params, const SparseFeatures& x) {
  if (x.dim() != params.dim()) {
    throw std::invalid_argument("scores: feature dimension mismatch");
  }
  Eigen::VectorXd s = params.biases();
  const auto weights = params.weights();
  for (Eigen::SparseVector<double>::InnerIterator it(x.vec()); it; ++it) {
    s += weights.col(it.index()) * it.value();
  }
  return s;
}

PredictionProbs predict(const ParameterVector& params, const SparseFeatures& x, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("predict: kappa must be positive");
  Eigen::VectorXd s = scores(params, x) / kappa;
  const Eigen::VectorXd e = (s.array() - s.maxCoeff()).exp();
  return PredictionProbs(e / e.sum());
}

ParameterGradient backward(const ParameterVector& params, const SparseFeatures& x,
                           const Eigen::VectorXd& dl_dp, double kappa) {
  if (dl_dp.size() != params.numClasses()) {
    throw std::invalid_argument("backward: dl_dp length must equal the class count");
  }
  const Eigen::VectorXd p = predict(params, x, kappa).vec();
  const double inner = dl_dp.dot(p);
  const Eigen::VectorXd dl_dscore = (p.array() * (dl_dp.array() - inner)) / kappa;

  ParameterGradient grad(params.numClasses(), params.dim());
  auto gw = grad.weights();
  for (Eigen::SparseVector<double>::InnerIterator it(x.vec()); it; ++it) {
    gw.col(it.index()) = dl_dscore * it.value();
  }
  grad.biases() = dl_dscore;
  return grad;
}

BatchLossGrad grad_theta_tsallis_batch(const ParameterVector& params,
                                       std::span<const TsallisBatchItem> batch) {
  if (batch.empty()) throw std::invalid_argument("grad_theta_tsallis_batch: empty batch");
  BatchLossGrad out{0.0, ParameterGradient(params.numClasses(), params.dim())};
  for (const auto& item : batch) {
    const PredictionProbs p = predict(params, *item.features, 1.0);
    out.loss += tsallis_loss(p, item.pseudo_label, item.psi);
    const Eigen::VectorXd dl_dp = tsallis_loss_grad_p(p, item.pseudo_label, item.psi);
    out.grad.flat() += backward(params, *item.features, dl_dp, 1.0).flat();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.grad.flat() *= inv;
  return out;
}

BatchLossGrad grad_theta_supervised_batch(const ParameterVector& params,
                                          std::span<const LabeledItem> batch) {
  if (batch.empty()) throw std::invalid_argument("grad_theta_supervised_batch: empty batch");
  BatchLossGrad out{0.0, ParameterGradient(params.numClasses(), params.dim())};
  for (const auto& item : batch) {
    const PredictionProbs p = predict(params, *item.features, 1.0);
    out.loss += cross_entropy(p, item.label);
    Eigen::VectorXd dl_dp = Eigen::VectorXd::Zero(p.numClasses());
    dl_dp[item.label.get()] = -1.0 / p[item.label.get()];
    out.grad.flat() += backward(params, *item.features, dl_dp, 1.0).flat();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.grad.flat() *= inv;
  return out;
}

ParameterVector sgd_step(const ParameterVector& params, const ParameterGradient& grad, double lr) {
  if (!params.sameShape(grad)) throw std::invalid_argument("sgd_step: shape mismatch");
  if (lr < 0.0) throw std::invalid_argument("sgd_step: learning rate must be non-negative");
  ParameterVector next = params;
  next.flat() -= lr * grad.flat();
  return next;
}

ParameterVector perturb(const ParameterVector& params, const ParameterGradient& direction,
                        double eps) {
  if (!params.sameShape(direction)) throw std::invalid_argument("perturb: shape mismatch");
  ParameterVector next = params;
  next.flat() += eps * direction.flat();
  return next;
}

ParameterVector init_params(Eigen::Index k, Eigen::Index d, std::uint64_t seed) {
  ParameterVector params(k, d);
  RngState rng(seed);
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) {
    params.flat()[i] = 0.01 * rng.gaussian();
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterVector& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32_le(out, static_cast<std::uint32_t>(params.numClasses()));
  write_u32_le(out, static_cast<std::uint32_t>(params.dim()));
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) write_f64_le(out, params.flat()[i]);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

ParameterVector load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  }
  const auto k = static_cast<Eigen::Index>(read_u32_le(in));
  const auto d = static_cast<Eigen::Index>(read_u32_le(in));
  if (!in || k < 2 || d < 1) throw std::runtime_error("load_checkpoint: bad header");
  ParameterVector params(k, d);
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) params.flat()[i] = read_f64_le(in);
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  return params;
}

}  // namespace mtem
