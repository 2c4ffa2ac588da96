#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cystseg {

/// Number of trees grown by train_forest.
inline constexpr int kForestTrees = 50;
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Class counts of training samples reaching the node (leaves only).
  double count_negative = 0.0;
  double count_positive = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  /// nodes[0] is the root. Samples with x[feature] <= threshold go left.
  std::vector<TreeNode> nodes;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_features = 0;
  int feature_subset_size = 0;
  std::uint64_t train_seed = 0;
  std::uint32_t format_version = kModelFormatVersion;
  /// Out-of-bag accuracy measured at training time; NaN when unavailable.
  double oob_accuracy = 0.0;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

struct TrainingSet {
  int n_features = 0;
  /// Row-major, rows * n_features values.
  std::vector<double> features;
  /// 1 = cyst, 0 = non-cyst.
  std::vector<std::uint8_t> labels;
  std::vector<std::string> provenance;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(n_features), static_cast<std::size_t>(n_features)};
  }
  void add(std::span<const double> x, bool cyst);
  void append(const TrainingSet& other);
};

struct ForestParams {
  int max_depth = 16;
  /// Nodes with fewer samples become leaves.
  int min_samples_split = 3;
  /// Features drawn per split; 0 means floor(sqrt(n_features)).
  int feature_subset_size = 0;
  int jobs = 1;
};

/// Bagged CART trees with Gini splits. Tree t draws from the stream
/// (seed, t), so the model does not depend on `jobs`.
ForestModel train_forest(const TrainingSet& t, std::uint64_t seed, const ForestParams& params = {});

/// Mean over trees of the leaf's cyst fraction.
double predict(const ForestModel& m, std::span<const double> x);

/// Little-endian binary layout, magic "OCSF"; see README for the layout.
void save_model(const ForestModel& m, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);
std::string serialize_model(const ForestModel& m);
ForestModel deserialize_model(std::string_view bytes);

}  // namespace cystseg
