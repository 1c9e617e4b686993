#ifndef MTEM_DATA_HPP
#define MTEM_DATA_HPP

// Synthetic domain-shift dataset generation, text ingestion with feature
// hashing, batching, splits, and evaluation metrics.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtem/model.hpp"
#include "mtem/rng.hpp"
#include "mtem/types.hpp"

namespace mtem {

struct Instance {
  Eigen::Index id;
  SparseFeatures features;
  std::optional<ClassIndex> label;
  std::string domain;
  std::string text;
};

/// Ordered instance collection with dense ids from 0 and a fixed feature
/// dimension and class count.
class Dataset {
 public:
  Dataset(Eigen::Index dim, Eigen::Index num_classes);

  void add(SparseFeatures features, std::optional<ClassIndex> label, std::string domain,
           std::string text = {});

  const std::vector<Instance>& instances() const noexcept { return instances_; }
  const Instance& operator[](Eigen::Index i) const { return instances_.at(i); }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(instances_.size()); }
  bool empty() const noexcept { return instances_.empty(); }
  Eigen::Index dim() const noexcept { return dim_; }
  Eigen::Index numClasses() const noexcept { return num_classes_; }

  bool fullyLabeled() const noexcept;

 private:
  Eigen::Index dim_;
  Eigen::Index num_classes_;
  std::vector<Instance> instances_;
};

/// Parameters of the synthetic covariate-shift generator.
struct ShiftSpec {
  Eigen::Index d = 200;
  Eigen::Index k = 2;
  Eigen::Index n_shared = 40;
  Eigen::Index n_domain = 60;
  double shift_strength = 0.6;
  double label_noise = 0.0;
  Eigen::Index n_source = 2000;
  Eigen::Index n_target = 2000;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct SyntheticShift {
  Dataset source;
  Dataset target_unlabeled;
  Dataset target_eval;
};

/// Generates a labeled source set and a 70/30 unlabeled/eval target
/// split. Each class carries a shared-feature prototype active in both
/// domains plus domain-specific prototypes; target instances draw a
/// per-instance shift magnitude uniform in [0, shift_strength] that
/// attenuates and corrupts the source-domain signal while growing the
/// target-only signal, so instances vary in transferability.
SyntheticShift gen_synthetic_shift(const ShiftSpec& spec, std::uint64_t seed);

/// Lowercase, split on non-alphanumerics, 64-bit FNV-1a hash modulo d,
/// count occurrences, L2-normalize.
SparseFeatures featurize_text(std::string_view text, Eigen::Index d);

/// Loads one JSON object per line with keys "text", optional "label",
/// optional "domain", optional precomputed "features" ([[index, value]]).
/// Labels map through a sorted label vocabulary. `expected_k`, when
/// positive, bounds the label cardinality and sets the class count for
/// unlabeled files.
Dataset load_jsonl(const std::filesystem::path& path, Eigen::Index d, Eigen::Index expected_k = 0);

/// Writes the dataset in the load_jsonl schema including "features".
void save_jsonl(const std::filesystem::path& path, const Dataset& dataset);

/// Uniform sample with replacement; deterministic in the rng state.
std::vector<const Instance*> sample_batch(const Dataset& dataset, Eigen::Index size,
                                          RngState& rng);

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  Eigen::VectorXd per_class_f1;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted class
};

/// Greedy prediction at kappa = 1 over a fully labeled dataset.
Metrics evaluate(const ParameterVector& params, const Dataset& dataset);

}  // namespace mtem

#endif  // MTEM_DATA_HPP
