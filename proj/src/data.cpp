#include "mtem/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mtem {

namespace {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view token) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const char c : token) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

SparseFeatures denseToSparse(const Eigen::VectorXd& x) {
  std::vector<std::pair<Eigen::Index, double>> pairs;
  pairs.reserve(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) pairs.emplace_back(i, x[i]);
  }
  return SparseFeatures::fromPairs(x.size(), pairs);
}

}  // namespace

Dataset::Dataset(Eigen::Index dim, Eigen::Index num_classes)
    : dim_(dim), num_classes_(num_classes) {
  if (dim < 1) throw std::invalid_argument("Dataset: dimension must be positive");
  if (num_classes < 0) throw std::invalid_argument("Dataset: negative class count");
}

void Dataset::add(SparseFeatures features, std::optional<ClassIndex> label, std::string domain,
                  std::string text) {
  if (features.dim() != dim_) throw std::invalid_argument("Dataset::add: dimension mismatch");
  if (label) label->require(num_classes_);
  instances_.push_back(Instance{size(), std::move(features), label, std::move(domain),
                                std::move(text)});
}

bool Dataset::fullyLabeled() const noexcept {
  return std::all_of(instances_.begin(), instances_.end(),
                     [](const Instance& inst) { return inst.label.has_value(); });
}

void ShiftSpec::validate() const {
  if (d < 2) throw std::invalid_argument("ShiftSpec: d must be at least 2");
  if (k < 2) throw std::invalid_argument("ShiftSpec: k must be at least 2");
  if (n_shared < 0) throw std::invalid_argument("ShiftSpec: n_shared must be non-negative");
  if (n_domain < 1) throw std::invalid_argument("ShiftSpec: n_domain must be positive");
  if (n_shared + 2 * n_domain > d) {
    throw std::invalid_argument("ShiftSpec: n_shared + 2*n_domain exceeds d");
  }
  if (shift_strength < 0.0 || shift_strength > 1.0) {
    throw std::invalid_argument("ShiftSpec: shift_strength must lie in [0, 1]");
  }
  if (label_noise < 0.0 || label_noise > 1.0) {
    throw std::invalid_argument("ShiftSpec: label_noise must lie in [0, 1]");
  }
  if (n_source < 1) throw std::invalid_argument("ShiftSpec: n_source must be positive");
  if (n_target < 2) throw std::invalid_argument("ShiftSpec: n_target must be at least 2");
}

SyntheticShift gen_synthetic_shift(const ShiftSpec& spec, std::uint64_t seed) {
  spec.validate();
  RngState rng(seed);

  // Per-class prototypes, unit-normalized per block then scaled. The
  // shared block transfers between domains; the domain blocks do not.
  const double shared_amp = 1.0;
  const double src_amp = 1.4;
  const double tgt_amp = 2.4;
  const double noise_sigma = 0.5;

  const Eigen::Index src_off = spec.n_shared;
  const Eigen::Index tgt_off = spec.n_shared + spec.n_domain;

  std::vector<Eigen::VectorXd> proto_shared(spec.k), proto_src(spec.k), proto_tgt(spec.k);
  auto draw_proto = [&rng](Eigen::Index n, double amp) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
    const double norm = v.norm();
    if (norm > 0.0) v *= amp / norm;
    return v;
  };
  for (Eigen::Index c = 0; c < spec.k; ++c) {
    proto_shared[c] = draw_proto(spec.n_shared, shared_amp);
    proto_src[c] = draw_proto(spec.n_domain, src_amp);
    proto_tgt[c] = draw_proto(spec.n_domain, tgt_amp);
  }

  auto make_instance = [&](bool target_domain) {
    const Eigen::Index c = rng.uniformIndex(spec.k);
    Eigen::VectorXd x(spec.d);
    for (Eigen::Index i = 0; i < spec.d; ++i) x[i] = noise_sigma * rng.gaussian();
    x.head(spec.n_shared) += proto_shared[c];
    if (!target_domain) {
      x.segment(src_off, spec.n_domain) += proto_src[c];
    } else {
      // The target block carries the domain's own class signal in full;
      // the per-instance shift magnitude only corrupts the source-block
      // signal toward a wrong class, so transferability varies while the
      // in-domain structure stays learnable.
      const double m = spec.shift_strength * rng.uniform();
      Eigen::Index wrong = rng.uniformIndex(spec.k - 1);
      if (wrong >= c) ++wrong;
      x.segment(src_off, spec.n_domain) += (1.0 - m) * proto_src[c] + m * proto_src[wrong];
      x.segment(tgt_off, spec.n_domain) += proto_tgt[c];
    }
    const double norm = x.norm();
    if (norm > 0.0) x /= norm;
    return std::make_pair(denseToSparse(x), c);
  };

  SyntheticShift out{Dataset(spec.d, spec.k), Dataset(spec.d, spec.k), Dataset(spec.d, spec.k)};

  for (Eigen::Index i = 0; i < spec.n_source; ++i) {
    auto [features, c] = make_instance(false);
    if (spec.label_noise > 0.0 && rng.uniform() < spec.label_noise) {
      Eigen::Index flipped = rng.uniformIndex(spec.k - 1);
      if (flipped >= c) ++flipped;
      c = flipped;
    }
    out.source.add(std::move(features), ClassIndex(c), "source");
  }

  const Eigen::Index n_unlabeled = (spec.n_target * 7) / 10;
  for (Eigen::Index i = 0; i < spec.n_target; ++i) {
    auto [features, c] = make_instance(true);
    if (i < n_unlabeled) {
      out.target_unlabeled.add(std::move(features), std::nullopt, "target");
    } else {
      out.target_eval.add(std::move(features), ClassIndex(c), "target");
    }
  }
  return out;
}

SparseFeatures featurize_text(std::string_view text, Eigen::Index d) {
  if (d < 2) throw std::invalid_argument("featurize_text: d must be at least 2");
  std::map<Eigen::Index, double> counts;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      counts[static_cast<Eigen::Index>(fnv1a64(token) % static_cast<std::uint64_t>(d))] += 1.0;
      token.clear();
    }
  };
  for (const char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      token.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();

  std::vector<std::pair<Eigen::Index, double>> pairs(counts.begin(), counts.end());
  double sq = 0.0;
  for (const auto& [idx, v] : pairs) sq += v * v;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, v] : pairs) v *= inv;
  }
  return SparseFeatures::fromPairs(d, pairs);
}

Dataset load_jsonl(const std::filesystem::path& path, Eigen::Index d, Eigen::Index expected_k) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_jsonl: cannot open " + path.string());

  struct Record {
    SparseFeatures features;
    std::optional<std::string> label;
    std::string domain;
    std::string text;
  };
  std::vector<Record> records;
  std::map<std::string, Eigen::Index> vocab;

  std::string line;
  Eigen::Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
      if (!obj.is_object()) throw std::runtime_error("not a JSON object");
      Record rec{SparseFeatures(d), std::nullopt, obj.value("domain", std::string{}),
                 obj.value("text", std::string{})};
      if (obj.contains("features")) {
        std::vector<std::pair<Eigen::Index, double>> pairs;
        for (const auto& fv : obj.at("features")) {
          pairs.emplace_back(fv.at(0).get<Eigen::Index>(), fv.at(1).get<double>());
        }
        rec.features = SparseFeatures::fromPairs(d, pairs);
      } else {
        rec.features = featurize_text(rec.text, d);
      }
      if (obj.contains("label")) {
        rec.label = obj.at("label").get<std::string>();
        vocab.emplace(*rec.label, 0);
      }
      records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  Eigen::Index next = 0;
  for (auto& [label, idx] : vocab) idx = next++;  // std::map iterates sorted
  const auto num_labels = static_cast<Eigen::Index>(vocab.size());
  if (expected_k > 0 && num_labels > expected_k) {
    throw std::runtime_error("load_jsonl: " + path.string() + " has " +
                             std::to_string(num_labels) + " labels, exceeding configured K = " +
                             std::to_string(expected_k));
  }
  const Eigen::Index k = std::max(expected_k, num_labels);

  Dataset dataset(d, k);
  for (auto& rec : records) {
    std::optional<ClassIndex> label;
    if (rec.label) label = ClassIndex(vocab.at(*rec.label));
    dataset.add(std::move(rec.features), label, std::move(rec.domain), std::move(rec.text));
  }
  return dataset;
}

void save_jsonl(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_jsonl: cannot open " + path.string());
  for (const Instance& inst : dataset.instances()) {
    json obj;
    obj["text"] = inst.text;
    if (!inst.domain.empty()) obj["domain"] = inst.domain;
    if (inst.label) obj["label"] = std::to_string(inst.label->get());
    json features = json::array();
    for (Eigen::SparseVector<double>::InnerIterator it(inst.features.vec()); it; ++it) {
      features.push_back(json::array({it.index(), it.value()}));
    }
    obj["features"] = std::move(features);
    out << obj.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_jsonl: write failed for " + path.string());
}

std::vector<const Instance*> sample_batch(const Dataset& dataset, Eigen::Index size,
                                          RngState& rng) {
  if (dataset.empty()) throw std::invalid_argument("sample_batch: empty dataset");
  if (size < 1) throw std::invalid_argument("sample_batch: size must be positive");
  std::vector<const Instance*> batch;
  batch.reserve(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    batch.push_back(&dataset[rng.uniformIndex(dataset.size())]);
  }
  return batch;
}

Metrics evaluate(const ParameterVector& params, const Dataset& dataset) {
  if (!dataset.fullyLabeled()) {
    throw std::invalid_argument("evaluate: dataset contains unlabeled instances");
  }
  const Eigen::Index k = dataset.numClasses();
  Metrics m;
  m.confusion = Eigen::MatrixXi::Zero(k, k);
  for (const Instance& inst : dataset.instances()) {
    const Eigen::VectorXd s = scores(params, inst.features);
    Eigen::Index pred = 0;
    s.maxCoeff(&pred);
    m.confusion(inst.label->get(), pred) += 1;
  }
  const double total = static_cast<double>(dataset.size());
  m.accuracy = static_cast<double>(m.confusion.trace()) / total;
  m.per_class_f1 = Eigen::VectorXd::Zero(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double tp = m.confusion(c, c);
    const double pred_c = m.confusion.col(c).sum();
    const double true_c = m.confusion.row(c).sum();
    const double precision = pred_c > 0 ? tp / pred_c : 0.0;
    const double recall = true_c > 0 ? tp / true_c : 0.0;
    m.per_class_f1[c] = (precision + recall) > 0.0
                            ? 2.0 * precision * recall / (precision + recall)
                            : 0.0;
  }
  m.macro_f1 = m.per_class_f1.mean();
  return m;
}

}  // namespace mtem
