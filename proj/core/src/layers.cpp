#include "cystseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cystseg/error.hpp"

namespace cystseg {

bool LayerBoundaries::valid(int width, int height, int max_jump) const noexcept {
  if (ilm_row.size() != static_cast<std::size_t>(width) || rpe_row.size() != static_cast<std::size_t>(width)) {
    return false;
  }
  for (int x = 0; x < width; ++x) {
    if (!(0 <= ilm_row[x] && ilm_row[x] < rpe_row[x] && rpe_row[x] < height)) return false;
    if (x + 1 < width && (std::abs(ilm_row[x + 1] - ilm_row[x]) > max_jump ||
                          std::abs(rpe_row[x + 1] - rpe_row[x]) > max_jump)) {
      return false;
    }
  }
  return true;
}

EdgeWeights::EdgeWeights(int width, int height, std::vector<double> gradient)
    : width_(width), height_(height), g_(std::move(gradient)) {
  if (g_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::DimensionMismatch, "gradient field does not match the slice");
  }
  has_signal_ = std::any_of(g_.begin(), g_.end(), [](double v) { return v > 0.0; });
}

EdgeWeights build_gradient_weights(const Slice& s, Polarity polarity) {
  const int w = s.width();
  const int h = s.height();
  std::vector<double> g(static_cast<std::size_t>(w) * h, 0.0);
  double peak = 0.0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = static_cast<double>(s(x, y + 1)) - static_cast<double>(s(x, y));
      const double r = polarity == Polarity::DarkToLight ? std::max(0.0, d) : std::max(0.0, -d);
      g[static_cast<std::size_t>(y) * w + x] = r;
      peak = std::max(peak, r);
    }
  }
  if (peak > 0.0) {
    for (auto& v : g) v /= peak;
  }
  return EdgeWeights(w, h, std::move(g));
}

BoundaryPath shortest_boundary(const EdgeWeights& weights, std::span<const std::uint8_t> allowed) {
  const int w = weights.width();
  const int h = weights.height();
  if (w < 1 || h < 1) throw Error(ErrorCode::InvalidArgument, "empty slice");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (!allowed.empty() && allowed.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "allowed-pixel mask does not match the slice");
  }
  auto usable = [&](int x, int y) { return allowed.empty() || allowed[static_cast<std::size_t>(y) * w + x] != 0; };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Column-major DP: cost[x * h + y] is the cheapest weight from the virtual
  // source to (x, y); from[] keeps the predecessor row.
  std::vector<double> cost(n, kInf);
  std::vector<int> from(n, -1);
  for (int y = 0; y < h; ++y) {
    if (usable(0, y)) cost[static_cast<std::size_t>(y)] = kMinEdgeWeight;
  }
  for (int x = 1; x < w; ++x) {
    const std::size_t prev = static_cast<std::size_t>(x - 1) * h;
    const std::size_t cur = static_cast<std::size_t>(x) * h;
    for (int y = 0; y < h; ++y) {
      if (!usable(x, y)) continue;
      double best = kInf;
      int arg = -1;
      // Ascending predecessor rows with strict '<' keep the smaller row on ties.
      for (int yp = std::max(0, y - 1); yp <= std::min(h - 1, y + 1); ++yp) {
        const double c = cost[prev + yp];
        if (c == kInf) continue;
        const double total = c + weights.weight(x - 1, yp, y);
        if (total < best) {
          best = total;
          arg = yp;
        }
      }
      cost[cur + y] = best;
      from[cur + y] = arg;
    }
  }

  const std::size_t last = static_cast<std::size_t>(w - 1) * h;
  double best = kInf;
  int end_row = -1;
  for (int y = 0; y < h; ++y) {
    if (cost[last + y] == kInf) continue;
    const double total = cost[last + y] + kMinEdgeWeight;
    if (total < best) {
      best = total;
      end_row = y;
    }
  }
  if (end_row < 0) throw Error(ErrorCode::LayersCrossed, "no admissible left-to-right path");

  BoundaryPath path;
  path.weight = best;
  path.rows.assign(static_cast<std::size_t>(w), 0);
  int y = end_row;
  for (int x = w - 1; x >= 0; --x) {
    path.rows[static_cast<std::size_t>(x)] = y;
    if (x > 0) y = from[static_cast<std::size_t>(x) * h + y];
  }
  return path;
}

std::vector<int> shortest_boundary(const Slice& s, Polarity polarity) {
  return shortest_boundary(build_gradient_weights(s, polarity)).rows;
}

namespace {

double mean_row(const std::vector<int>& rows) {
  return std::accumulate(rows.begin(), rows.end(), 0.0) / static_cast<double>(rows.size());
}

}  // namespace

LayerBoundaries segment_layers(const Slice& s, const LayerParams& params) {
  if (params.rpe_offset < 1) throw Error(ErrorCode::InvalidArgument, "rpe_offset must be >= 1");
  const int w = s.width();
  const int h = s.height();
  const EdgeWeights weights = build_gradient_weights(s, Polarity::DarkToLight);
  if (!weights.has_signal()) throw Error(ErrorCode::LayersCrossed, "slice has no dark-to-light gradient");

  const std::vector<int> strongest = shortest_boundary(weights).rows;

  // Second strongest boundary away from the first; the upper of the pair is
  // taken as the ILM.
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(w) * h, 1);
  for (int x = 0; x < w; ++x) {
    for (int y = std::max(0, strongest[x] - params.rpe_offset);
         y <= std::min(h - 1, strongest[x] + params.rpe_offset); ++y) {
      allowed[static_cast<std::size_t>(y) * w + x] = 0;
    }
  }
  std::vector<int> ilm = strongest;
  try {
    const std::vector<int> second = shortest_boundary(weights, allowed).rows;
    if (mean_row(second) < mean_row(strongest)) ilm = second;
  } catch (const Error&) {
    // No room for a second boundary: the strongest one is the ILM.
  }

  // RPE: strongest boundary on the sub-image at least rpe_offset rows below the ILM.
  std::fill(allowed.begin(), allowed.end(), std::uint8_t{0});
  for (int x = 0; x < w; ++x) {
    for (int y = ilm[x] + params.rpe_offset; y < h; ++y) allowed[static_cast<std::size_t>(y) * w + x] = 1;
  }
  LayerBoundaries b;
  b.ilm_row = std::move(ilm);
  b.rpe_row = shortest_boundary(weights, allowed).rows;
  if (!b.valid(w, h, params.max_jump)) {
    throw Error(ErrorCode::LayersCrossed, "ILM/RPE ordering or jump constraint violated");
  }
  return b;
}

BinaryMask roi_mask(const LayerBoundaries& b, int width, int height) {
  if (b.ilm_row.size() != static_cast<std::size_t>(width) || b.rpe_row.size() != static_cast<std::size_t>(width)) {
    throw Error(ErrorCode::DimensionMismatch, "boundaries do not match the mask width");
  }
  BinaryMask m(width, height, MaskSource::Prediction);
  for (int x = 0; x < width; ++x) {
    for (int y = std::max(0, b.ilm_row[x] + 1); y < std::min(height, b.rpe_row[x]); ++y) m.set(x, y);
  }
  return m;
}

}  // namespace cystseg
