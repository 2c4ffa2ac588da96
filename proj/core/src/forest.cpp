#include "cystseg/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cystseg/error.hpp"
#include "cystseg/parallel.hpp"
#include "cystseg/random.hpp"

namespace cystseg {

void TrainingSet::add(std::span<const double> x, bool cyst) {
  if (n_features == 0 && labels.empty()) n_features = static_cast<int>(x.size());
  if (x.size() != static_cast<std::size_t>(n_features)) {
    throw Error(ErrorCode::FeatureLengthMismatch, "training row has " + std::to_string(x.size()) +
                                                      " features, expected " + std::to_string(n_features));
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(cyst ? 1 : 0);
}

void TrainingSet::append(const TrainingSet& other) {
  if (other.rows() == 0) return;
  if (rows() == 0 && n_features == 0) n_features = other.n_features;
  if (other.n_features != n_features) throw Error(ErrorCode::FeatureLengthMismatch, "feature dimensions differ");
  features.insert(features.end(), other.features.begin(), other.features.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
}

namespace {

struct Sample {
  double value;
  std::uint8_t label;
};

double gini_sum(double neg, double pos) {
  const double n = neg + pos;
  if (n == 0.0) return 0.0;
  // n * gini, so child impurities can be added directly.
  return n - (neg * neg + pos * pos) / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const ForestParams& params, int subset, Rng& rng)
      : data_(data), params_(params), subset_(subset), rng_(rng) {}

  DecisionTree build(std::vector<int> samples) {
    DecisionTree tree;
    grow(tree, std::move(samples), 0);
    return tree;
  }

 private:
  int grow(DecisionTree& tree, std::vector<int> samples, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double neg = 0.0, pos = 0.0;
    for (int s : samples) (data_.labels[s] ? pos : neg) += 1.0;

    auto make_leaf = [&] {
      TreeNode& leaf = tree.nodes[id];
      leaf.count_negative = neg;
      leaf.count_positive = pos;
      return id;
    };
    if (neg == 0.0 || pos == 0.0 || depth >= params_.max_depth ||
        static_cast<int>(samples.size()) < params_.min_samples_split) {
      return make_leaf();
    }

    // Draw `subset_` distinct features (partial Fisher-Yates).
    std::vector<int> features(static_cast<std::size_t>(data_.n_features));
    std::iota(features.begin(), features.end(), 0);
    for (int i = 0; i < subset_; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng_.below(features.size() - static_cast<std::size_t>(i));
      std::swap(features[static_cast<std::size_t>(i)], features[j]);
    }

    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<Sample> column(samples.size());
    for (int k = 0; k < subset_; ++k) {
      const int feat = features[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < samples.size(); ++i) {
        column[i] = {data_.row(static_cast<std::size_t>(samples[i]))[static_cast<std::size_t>(feat)],
                     data_.labels[static_cast<std::size_t>(samples[i])]};
      }
      std::sort(column.begin(), column.end(), [](const Sample& a, const Sample& b) {
        return a.value < b.value || (a.value == b.value && a.label < b.label);
      });
      double left_neg = 0.0, left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        (column[i].label ? left_pos : left_neg) += 1.0;
        if (column[i].value == column[i + 1].value) continue;
        const double impurity = gini_sum(left_neg, left_pos) + gini_sum(neg - left_neg, pos - left_pos);
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = feat;
          double mid = column[i].value + (column[i + 1].value - column[i].value) / 2.0;
          if (!(mid < column[i + 1].value)) mid = column[i].value;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return make_leaf();

    std::vector<int> left, right;
    for (int s : samples) {
      (data_.row(static_cast<std::size_t>(s))[static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right)
          .push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  const TrainingSet& data_;
  const ForestParams& params_;
  int subset_;
  Rng& rng_;
};

double tree_probability(const DecisionTree& tree, std::span<const double> x) {
  int id = 0;
  for (;;) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      const double n = node.count_negative + node.count_positive;
      return n > 0.0 ? node.count_positive / n : 0.0;
    }
    id = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
}

}  // namespace

ForestModel train_forest(const TrainingSet& t, std::uint64_t seed, const ForestParams& params) {
  const std::size_t n = t.rows();
  if (t.n_features < 1 || t.features.size() != n * static_cast<std::size_t>(t.n_features)) {
    throw Error(ErrorCode::InvalidArgument, "training set shape is inconsistent");
  }
  const auto positives = static_cast<std::size_t>(std::count(t.labels.begin(), t.labels.end(), std::uint8_t{1}));
  if (n > 0 && (positives == 0 || positives == n)) {
    throw Error(ErrorCode::SingleClassTrainingSet, "training set contains only one class");
  }
  if (n < 20) throw Error(ErrorCode::TooFewSamples, "need at least 20 training rows, got " + std::to_string(n));
  for (double v : t.features) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "training features contain NaN or Inf");
  }
  if (params.max_depth < 1 || params.min_samples_split < 2) {
    throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1 and min_samples_split >= 2");
  }
  int subset = params.feature_subset_size > 0
                   ? params.feature_subset_size
                   : static_cast<int>(std::floor(std::sqrt(static_cast<double>(t.n_features))));
  subset = std::clamp(subset, 1, t.n_features);

  ForestModel model;
  model.n_features = t.n_features;
  model.feature_subset_size = subset;
  model.train_seed = seed;
  model.trees.resize(kForestTrees);
  std::vector<std::vector<std::uint8_t>> in_bag(kForestTrees);

  parallel_for(kForestTrees, params.jobs, [&](std::size_t tree_index) {
    Rng rng = Rng::stream(seed, tree_index);
    std::vector<int> bootstrap(n);
    auto& bag = in_bag[tree_index];
    bag.assign(n, 0);
    for (auto& b : bootstrap) {
      b = static_cast<int>(rng.below(n));
      bag[static_cast<std::size_t>(b)] = 1;
    }
    std::sort(bootstrap.begin(), bootstrap.end());
    TreeBuilder builder(t, params, subset, rng);
    model.trees[tree_index] = builder.build(std::move(bootstrap));
  });

  std::vector<double> oob_sum(n, 0.0);
  std::vector<int> oob_count(n, 0);
  for (std::size_t k = 0; k < model.trees.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[k][i]) continue;
      oob_sum[i] += tree_probability(model.trees[k], t.row(i));
      ++oob_count[i];
    }
  }
  std::size_t evaluated = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (oob_count[i] == 0) continue;
    ++evaluated;
    const bool predicted = oob_sum[i] / oob_count[i] >= 0.5;
    if (predicted == (t.labels[i] != 0)) ++correct;
  }
  model.oob_accuracy = evaluated ? static_cast<double>(correct) / static_cast<double>(evaluated)
                                 : std::numeric_limits<double>::quiet_NaN();
  return model;
}

double predict(const ForestModel& m, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(m.n_features)) {
    throw Error(ErrorCode::FeatureLengthMismatch, "model expects " + std::to_string(m.n_features) +
                                                      " features, got " + std::to_string(x.size()));
  }
  if (m.trees.empty()) throw Error(ErrorCode::InvalidArgument, "model has no trees");
  double sum = 0.0;
  for (const auto& tree : m.trees) sum += tree_probability(tree, x);
  return std::clamp(sum / static_cast<double>(m.trees.size()), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr char kMagic[4] = {'O', 'C', 'S', 'F'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : in_(bytes) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::CorruptModelFile, "model file is truncated");
  }
  std::uint64_t get(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const ForestModel& m) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(m.format_version);
  w.u64(m.train_seed);
  w.u32(static_cast<std::uint32_t>(m.n_features));
  w.u32(static_cast<std::uint32_t>(m.feature_subset_size));
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  w.f64(m.oob_accuracy);
  for (const auto& tree : m.trees) {
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const auto& node : tree.nodes) {
      w.i32(node.feature);
      w.f64(node.threshold);
      w.i32(node.left);
      w.i32(node.right);
      w.f64(node.count_negative);
      w.f64(node.count_positive);
    }
  }
  return w.take();
}

ForestModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.raw(4).data(), kMagic, 4) != 0) throw Error(ErrorCode::CorruptModelFile, "bad magic bytes");
  ForestModel m;
  m.format_version = r.u32();
  if (m.format_version == 0) throw Error(ErrorCode::CorruptModelFile, "format version 0");
  if (m.format_version > kModelFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "model format " + std::to_string(m.format_version) +
                                                " is newer than supported version " +
                                                std::to_string(kModelFormatVersion));
  }
  m.train_seed = r.u64();
  m.n_features = static_cast<int>(r.u32());
  m.feature_subset_size = static_cast<int>(r.u32());
  const std::uint32_t n_trees = r.u32();
  m.oob_accuracy = r.f64();
  if (m.n_features <= 0 || n_trees == 0 || n_trees > 100000) {
    throw Error(ErrorCode::CorruptModelFile, "implausible model header");
  }
  m.trees.resize(n_trees);
  for (auto& tree : m.trees) {
    const std::uint32_t n_nodes = r.u32();
    if (n_nodes == 0 || n_nodes > bytes.size()) throw Error(ErrorCode::CorruptModelFile, "bad node count");
    tree.nodes.resize(n_nodes);
    for (auto& node : tree.nodes) {
      node.feature = r.i32();
      node.threshold = r.f64();
      node.left = r.i32();
      node.right = r.i32();
      node.count_negative = r.f64();
      node.count_positive = r.f64();
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& node = tree.nodes[i];
      if (node.is_leaf()) continue;
      const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n_nodes); };
      if (node.feature >= m.n_features || !in_range(node.left) || !in_range(node.right)) {
        throw Error(ErrorCode::CorruptModelFile, "tree node references out of range");
      }
    }
  }
  if (!r.done()) throw Error(ErrorCode::CorruptModelFile, "trailing bytes after model");
  return m;
}

void save_model(const ForestModel& m, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

ForestModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace cystseg
