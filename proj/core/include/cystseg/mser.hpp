#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cystseg/image.hpp"

namespace cystseg {

/// Min-tree of an 8-bit image: nodes are the 4-connected components of the
/// lower level sets {p : I(p) <= t}. A node exists at every level where its
/// component changes; its parent is the smallest strictly enclosing
/// component at a higher threshold.
class ComponentTree {
 public:
  struct Node {
    std::uint8_t level = 0;
    int area = 0;
    int parent = -1;
    std::vector<int> children;
  };

  static ComponentTree build(const Image8& image);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int root() const noexcept { return root_; }
  /// Node whose level equals the pixel's value.
  int node_of_pixel(int pixel) const { return pixel_node_[static_cast<std::size_t>(pixel)]; }

  /// All pixels of the component (the node and its descendants), sorted.
  std::vector<int> pixels(int node) const;

 private:
  int width_ = 0;
  int height_ = 0;
  int root_ = -1;
  std::vector<Node> nodes_;
  std::vector<int> pixel_node_;
  // Pixels whose own level equals their node's level, grouped per node.
  std::vector<int> node_pixel_begin_;
  std::vector<int> node_pixel_list_;
};

struct MserParams {
  int delta = 5;
  int min_area = 30;
  int max_area = 15000;
  double max_variation = 0.5;
  double min_diversity = 0.3;

  void validate() const;
};

struct BoundingBox {
  int x_min = 0, y_min = 0, x_max = -1, y_max = -1;
  int width() const noexcept { return x_max - x_min + 1; }
  int height() const noexcept { return y_max - y_min + 1; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct CandidateRegion {
  /// Row-major pixel indices, sorted.
  std::vector<int> pixels;
  BoundingBox bbox;
  int area = 0;
  /// Area variation at the region's level; lower is more stable.
  double stability = 0.0;
  std::uint8_t level = 0;
  /// Mean centre-surround saliency over the region's pixels.
  double saliency_score = 0.0;
  std::optional<double> cyst_prob;

  /// Ranking score: saliency weighted by stability.
  double score() const noexcept { return saliency_score / (1.0 + stability); }
};

/// [0, 1] floats to 8 bits by round(v * 255).
Image8 quantize_unit(const Slice& s);

/// Variation (area(ancestor at level + delta) - area) / area for every node.
std::vector<double> node_variations(const ComponentTree& tree, int delta);

/// Nodes that are local variation minima along their branch with
/// variation <= max_variation and area inside the bounds. No diversity
/// pruning; the result grows monotonically with max_variation.
std::vector<int> stable_extremal_nodes(const ComponentTree& tree, const MserParams& params);

/// Dark MSERs of `s` (0..1 scale). Regions with fewer than half their pixels
/// inside `roi` are dropped. `saliency`, when non-null, fills
/// saliency_score. Output is sorted by descending score, then by first pixel.
std::vector<CandidateRegion> detect_mser(const Slice& s, const BinaryMask& roi, const MserParams& params,
                                         const Slice* saliency = nullptr);

/// Same, on an already quantized image.
std::vector<CandidateRegion> detect_mser(const Image8& image, const BinaryMask& roi, const MserParams& params,
                                         const Slice* saliency = nullptr);

CandidateRegion make_region(std::vector<int> pixels, int width);

}  // namespace cystseg
