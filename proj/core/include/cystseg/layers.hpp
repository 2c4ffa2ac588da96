#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cystseg/image.hpp"

namespace cystseg {

/// Per-column row of the ILM and RPE boundaries. The boundary row is the last
/// row above the dark-to-light transition, so the retina occupies
/// ilm_row[x] < y < rpe_row[x].
struct LayerBoundaries {
  std::vector<int> ilm_row;
  std::vector<int> rpe_row;

  /// Ordering, range and column-to-column jump checks.
  bool valid(int width, int height, int max_jump) const noexcept;
};

enum class Polarity { DarkToLight, LightToDark };

inline constexpr double kMinEdgeWeight = 1e-5;

/// Edge weights on the column-advancing pixel graph:
///   w(a, b) = 2 - (g(a) + g(b)) + w_min
/// with g the polarity-rectified vertical gradient scaled to [0, 1].
class EdgeWeights {
 public:
  EdgeWeights(int width, int height, std::vector<double> gradient);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double gradient(int x, int y) const noexcept { return g_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Weight of the move (x, y) -> (x + 1, y_next).
  double weight(int x, int y, int y_next) const noexcept {
    return 2.0 - (gradient(x, y) + gradient(x + 1, y_next)) + kMinEdgeWeight;
  }
  bool has_signal() const noexcept { return has_signal_; }

 private:
  int width_;
  int height_;
  std::vector<double> g_;
  bool has_signal_ = false;
};

EdgeWeights build_gradient_weights(const Slice& s, Polarity polarity);

struct BoundaryPath {
  std::vector<int> rows;
  /// Includes the two virtual endpoint edges.
  double weight = 0.0;
};

/// Minimum-weight left-to-right path with moves dx = +1, dy in {-1, 0, 1},
/// entered and left through virtual nodes attached to every first/last column
/// pixel. `allowed`, when given, is a row-major 0/1 mask of usable pixels.
/// Ties prefer the smaller row. Throws LayersCrossed if no path exists.
BoundaryPath shortest_boundary(const EdgeWeights& weights, std::span<const std::uint8_t> allowed = {});
std::vector<int> shortest_boundary(const Slice& s, Polarity polarity);

struct LayerParams {
  /// RPE search starts this many rows below the ILM.
  int rpe_offset = 10;
  /// Maximum column-to-column change accepted in returned boundaries.
  int max_jump = 15;
};

/// ILM: the upper of the two strongest dark-to-light boundaries. RPE: the
/// strongest dark-to-light boundary at least `rpe_offset` rows below the ILM.
/// Throws LayersCrossed when the slice carries no gradient or the ordering
/// cannot be satisfied.
LayerBoundaries segment_layers(const Slice& s, const LayerParams& params = {});

/// True exactly where ilm_row[x] < y < rpe_row[x].
BinaryMask roi_mask(const LayerBoundaries& b, int width, int height);

}  // namespace cystseg
