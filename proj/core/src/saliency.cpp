#include "cystseg/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cystseg/error.hpp"

namespace cystseg {
namespace {

// Differences below this are rounding noise, far under one 8-bit step.
constexpr double kContrastFloor = 1e-9;

constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

// Mirror without repeating the edge sample: -1 -> 1, n -> n - 2.
int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

Slice blur_and_decimate(const Slice& s) {
  const int w = s.width();
  const int h = s.height();
  std::vector<double> rows(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * s(mirror(x + k, w), y);
      rows[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  const int ow = w / 2;
  const int oh = h / 2;
  Slice out(ow, oh);
  for (int oy = 0; oy < oh; ++oy) {
    const int y = 2 * oy;
    for (int ox = 0; ox < ow; ++ox) {
      const int x = 2 * ox;
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * rows[static_cast<std::size_t>(mirror(y + k, h)) * w + x];
      out(ox, oy) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

std::vector<PyramidLevel> gaussian_pyramid(const Slice& s, int levels) {
  if (levels < 1) throw Error(ErrorCode::TooManyLevels, "pyramid needs at least one level");
  const long long need = 8LL << (levels - 1);
  if (levels > 24 || std::min(s.width(), s.height()) < need) {
    throw Error(ErrorCode::TooManyLevels, std::to_string(levels) + " levels need a side of at least " +
                                              std::to_string(need) + " pixels");
  }
  std::vector<PyramidLevel> out;
  out.reserve(static_cast<std::size_t>(levels));
  out.push_back({0, s});
  for (int l = 1; l < levels; ++l) out.push_back({l, blur_and_decimate(out.back().slice)});
  return out;
}

double sample_level(const Slice& level, int level_index, double x, double y) {
  const double scale = std::ldexp(1.0, -level_index);
  const double fx = std::clamp(x * scale, 0.0, static_cast<double>(level.width() - 1));
  const double fy = std::clamp(y * scale, 0.0, static_cast<double>(level.height() - 1));
  const int x0 = std::min(static_cast<int>(fx), std::max(level.width() - 2, 0));
  const int y0 = std::min(static_cast<int>(fy), std::max(level.height() - 2, 0));
  const int x1 = std::min(x0 + 1, level.width() - 1);
  const int y1 = std::min(y0 + 1, level.height() - 1);
  const double tx = fx - x0;
  const double ty = fy - y0;
  const double top = (1.0 - tx) * level(x0, y0) + tx * level(x1, y0);
  const double bottom = (1.0 - tx) * level(x0, y1) + tx * level(x1, y1);
  return (1.0 - ty) * top + ty * bottom;
}

Slice center_surround_dark(const Slice& s, const std::vector<int>& centers, const std::vector<int>& deltas) {
  if (centers.empty() || deltas.empty()) throw Error(ErrorCode::InvalidScalePair, "empty scale set");
  for (int c : centers) {
    if (c < 0) throw Error(ErrorCode::InvalidScalePair, "centre level must be >= 0");
  }
  for (int d : deltas) {
    if (d < 1) throw Error(ErrorCode::InvalidScalePair, "surround offset must be >= 1");
  }
  const int depth = *std::max_element(centers.begin(), centers.end()) +
                    *std::max_element(deltas.begin(), deltas.end()) + 1;
  if (depth > 24 || std::min(s.width(), s.height()) < (8LL << (depth - 1))) {
    throw Error(ErrorCode::InvalidScalePair, "scale pairs exceed the pyramid depth available for this slice");
  }
  const auto pyramid = gaussian_pyramid(s, depth);

  // Each distinct level is upsampled once.
  std::set<int> used;
  for (int c : centers) {
    used.insert(c);
    for (int d : deltas) used.insert(c + d);
  }
  const int w = s.width();
  const int h = s.height();
  std::vector<std::vector<double>> up(static_cast<std::size_t>(depth));
  for (int l : used) {
    auto& buf = up[static_cast<std::size_t>(l)];
    buf.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) buf[static_cast<std::size_t>(y) * w + x] = sample_level(pyramid[l].slice, l, x, y);
    }
  }

  std::vector<double> acc(static_cast<std::size_t>(w) * h, 0.0);
  int pairs = 0;
  for (int c : centers) {
    for (int d : deltas) {
      const auto& centre = up[static_cast<std::size_t>(c)];
      const auto& surround = up[static_cast<std::size_t>(c + d)];
      for (std::size_t i = 0; i < acc.size(); ++i) {
        const double diff = surround[i] - centre[i];
        if (diff > kContrastFloor) acc[i] += diff;
      }
      ++pairs;
    }
  }
  double peak = 0.0;
  for (auto& v : acc) {
    v /= pairs;
    peak = std::max(peak, v);
  }
  Slice out(w, h, 0.0f);
  if (peak > 0.0) {
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / peak);
  }
  return out;
}

}  // namespace cystseg
