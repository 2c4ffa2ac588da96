#include "cystseg/mser.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cystseg/error.hpp"

namespace cystseg {
namespace {

int find_root(std::vector<int>& zpar, int p) {
  int r = p;
  while (zpar[r] != r) r = zpar[r];
  while (zpar[p] != r) {
    const int next = zpar[p];
    zpar[p] = r;
    p = next;
  }
  return r;
}

}  // namespace

ComponentTree ComponentTree::build(const Image8& image) {
  ComponentTree tree;
  tree.width_ = image.width();
  tree.height_ = image.height();
  const int w = image.width();
  const int n = static_cast<int>(image.size());
  if (n == 0) return tree;

  // Counting sort: ascending level, ties by pixel index.
  std::array<int, 257> start{};
  for (int p = 0; p < n; ++p) ++start[image[p] + 1];
  for (int v = 0; v < 256; ++v) start[v + 1] += start[v];
  std::vector<int> order(static_cast<std::size_t>(n));
  {
    auto fill = start;
    for (int p = 0; p < n; ++p) order[fill[image[p]]++] = p;
  }

  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<int> zpar(static_cast<std::size_t>(n), -1);
  for (int p : order) {
    parent[p] = p;
    zpar[p] = p;
    const int x = p % w;
    const int neighbours[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1, p - w, p + w < n ? p + w : -1};
    for (int q : neighbours) {
      if (q < 0 || zpar[q] < 0) continue;
      const int r = find_root(zpar, q);
      if (r != p) {
        parent[r] = p;
        zpar[r] = p;
      }
    }
  }
  // Point every pixel at the canonical element of its level.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int p = *it;
    const int q = parent[p];
    if (image[parent[q]] == image[q]) parent[p] = parent[q];
  }
  const int root_pixel = order.back();
  auto canonical = [&](int p) { return p == root_pixel || image[parent[p]] != image[p]; };

  std::vector<int> node_id(static_cast<std::size_t>(n), -1);
  for (int p : order) {
    if (!canonical(p)) continue;
    node_id[p] = static_cast<int>(tree.nodes_.size());
    Node node;
    node.level = image[p];
    tree.nodes_.push_back(node);
  }
  tree.root_ = node_id[root_pixel];
  tree.pixel_node_.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> own(tree.nodes_.size(), 0);
  for (int p = 0; p < n; ++p) {
    const int id = canonical(p) ? node_id[p] : node_id[parent[p]];
    tree.pixel_node_[p] = id;
    ++own[id];
  }
  for (int p : order) {
    if (!canonical(p) || p == root_pixel) continue;
    tree.nodes_[node_id[p]].parent = node_id[parent[p]];
  }
  // Node ids follow ascending level, so children precede parents.
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    Node& node = tree.nodes_[i];
    node.area += own[i];
    if (node.parent >= 0) {
      tree.nodes_[node.parent].area += node.area;
      tree.nodes_[node.parent].children.push_back(static_cast<int>(i));
    }
  }

  tree.node_pixel_begin_.assign(tree.nodes_.size() + 1, 0);
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) tree.node_pixel_begin_[i + 1] = tree.node_pixel_begin_[i] + own[i];
  tree.node_pixel_list_.assign(static_cast<std::size_t>(n), 0);
  std::vector<int> cursor(tree.node_pixel_begin_.begin(), tree.node_pixel_begin_.end() - 1);
  for (int p = 0; p < n; ++p) tree.node_pixel_list_[cursor[tree.pixel_node_[p]]++] = p;
  return tree;
}

std::vector<int> ComponentTree::pixels(int node) const {
  std::vector<int> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.insert(out.end(), node_pixel_list_.begin() + node_pixel_begin_[id],
               node_pixel_list_.begin() + node_pixel_begin_[id + 1]);
    for (int c : nodes_[id].children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void MserParams::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, std::string("mser: ") + what); };
  if (delta < 1) fail("delta must be >= 1");
  if (min_area < 10) fail("min_area must be >= 10");
  if (max_area > 20000) fail("max_area must be <= 20000");
  if (max_area < min_area) fail("max_area < min_area");
  if (!(max_variation >= 0.0)) fail("max_variation must be >= 0");
  if (!(min_diversity >= 0.0 && min_diversity < 1.0)) fail("min_diversity must be in [0, 1)");
}

Image8 quantize_unit(const Slice& s) {
  Image8 out(s.width(), s.height());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(static_cast<double>(s[i]) * 255.0), 0L, 255L));
  }
  return out;
}

std::vector<double> node_variations(const ComponentTree& tree, int delta) {
  const auto& nodes = tree.nodes();
  std::vector<double> var(nodes.size(), 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int limit = nodes[i].level + delta;
    int a = static_cast<int>(i);
    while (nodes[a].parent >= 0 && nodes[nodes[a].parent].level <= limit) a = nodes[a].parent;
    var[i] = static_cast<double>(nodes[a].area - nodes[i].area) / nodes[i].area;
  }
  return var;
}

namespace {

std::vector<std::uint8_t> stable_flags(const ComponentTree& tree, const std::vector<double>& var,
                                       const MserParams& params) {
  const auto& nodes = tree.nodes();
  std::vector<std::uint8_t> stable(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    if (nd.parent < 0) continue;
    if (nd.area < params.min_area || nd.area > params.max_area || var[i] > params.max_variation) continue;
    if (nd.parent >= 0 && var[i] > var[nd.parent]) continue;
    bool below_child = nd.children.empty();
    for (int c : nd.children) below_child = below_child || var[i] < var[c];
    stable[i] = below_child ? 1 : 0;
  }
  return stable;
}

// True if a stable descendant larger than max_child_area is more stable.
bool beaten_by_descendant(const ComponentTree& tree, const std::vector<double>& var,
                          const std::vector<std::uint8_t>& stable, int node, double variation, int max_child_area) {
  for (int c : tree.node(node).children) {
    if (tree.node(c).area <= max_child_area) continue;
    if (stable[c] && var[c] < variation) return true;
    if (beaten_by_descendant(tree, var, stable, c, variation, max_child_area)) return true;
  }
  return false;
}

}  // namespace

std::vector<int> stable_extremal_nodes(const ComponentTree& tree, const MserParams& params) {
  const auto var = node_variations(tree, params.delta);
  const auto stable = stable_flags(tree, var, params);
  std::vector<int> out;
  for (std::size_t i = 0; i < stable.size(); ++i) {
    if (stable[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

CandidateRegion make_region(std::vector<int> pixels, int width) {
  CandidateRegion r;
  std::sort(pixels.begin(), pixels.end());
  r.bbox = {width, 1 << 30, -1, -1};
  for (int p : pixels) {
    const int x = p % width;
    const int y = p / width;
    r.bbox.x_min = std::min(r.bbox.x_min, x);
    r.bbox.x_max = std::max(r.bbox.x_max, x);
    r.bbox.y_min = std::min(r.bbox.y_min, y);
    r.bbox.y_max = std::max(r.bbox.y_max, y);
  }
  r.area = static_cast<int>(pixels.size());
  r.pixels = std::move(pixels);
  return r;
}

std::vector<CandidateRegion> detect_mser(const Image8& image, const BinaryMask& roi, const MserParams& params,
                                         const Slice* saliency) {
  params.validate();
  if (roi.width() != image.width() || roi.height() != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "ROI mask does not match the slice");
  }
  if (saliency && !saliency->same_shape(image)) {
    throw Error(ErrorCode::DimensionMismatch, "saliency map does not match the slice");
  }
  const ComponentTree tree = ComponentTree::build(image);
  const auto var = node_variations(tree, params.delta);
  const auto stable = stable_flags(tree, var, params);
  const double keep = 1.0 - params.min_diversity;

  std::vector<CandidateRegion> out;
  for (std::size_t i = 0; i < stable.size(); ++i) {
    if (!stable[i]) continue;
    const int id = static_cast<int>(i);
    const auto& nd = tree.node(id);

    // Duplicate suppression against nearly identical ancestors/descendants.
    const int min_parent_area = static_cast<int>(nd.area / keep + 0.5);
    bool drop = false;
    for (int p = nd.parent; p >= 0 && tree.node(p).area < min_parent_area; p = tree.node(p).parent) {
      if (stable[p] && var[p] <= var[i]) {
        drop = true;
        break;
      }
    }
    if (drop) continue;
    const int max_child_area = static_cast<int>(nd.area * keep + 0.5);
    if (beaten_by_descendant(tree, var, stable, id, var[i], max_child_area)) continue;

    std::vector<int> px = tree.pixels(id);
    std::size_t inside = 0;
    for (int p : px) inside += roi[static_cast<std::size_t>(p)] ? 1 : 0;
    if (2 * inside < px.size()) continue;

    CandidateRegion r = make_region(std::move(px), image.width());
    r.stability = var[i];
    r.level = nd.level;
    if (saliency) {
      double sum = 0.0;
      for (int p : r.pixels) sum += (*saliency)[static_cast<std::size_t>(p)];
      r.saliency_score = sum / r.area;
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const CandidateRegion& a, const CandidateRegion& b) {
    if (a.score() != b.score()) return a.score() > b.score();
    if (a.pixels.front() != b.pixels.front()) return a.pixels.front() < b.pixels.front();
    return a.area < b.area;
  });
  return out;
}

std::vector<CandidateRegion> detect_mser(const Slice& s, const BinaryMask& roi, const MserParams& params,
                                         const Slice* saliency) {
  return detect_mser(quantize_unit(s), roi, params, saliency);
}

}  // namespace cystseg
