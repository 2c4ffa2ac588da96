#include "cystseg/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "cystseg/error.hpp"
#include "cystseg/volume.hpp"

namespace cystseg {
namespace {

constexpr std::array<int, 256> make_uniform_table() {
  std::array<int, 256> table{};
  int next = 0;
  for (int code = 0; code < 256; ++code) {
    const auto c = static_cast<std::uint8_t>(code);
    const auto rotated = static_cast<std::uint8_t>((c >> 1) | (c << 7));
    const int transitions = std::popcount(static_cast<unsigned>(c ^ rotated));
    table[static_cast<std::size_t>(code)] = transitions <= 2 ? next++ : kLbpBins - 1;
  }
  return table;
}

constexpr std::array<int, 256> kUniformTable = make_uniform_table();

}  // namespace

std::uint8_t lbp_code(const Image8& image, int x, int y) {
  const std::uint8_t centre = image(x, y);
  std::uint8_t code = 0;
  for (std::size_t i = 0; i < kLbpNeighbours.size(); ++i) {
    const int nx = x + kLbpNeighbours[i][0];
    const int ny = y + kLbpNeighbours[i][1];
    const std::uint8_t v = image.contains(nx, ny) ? image(nx, ny) : centre;
    if (v > centre) code = static_cast<std::uint8_t>(code | (1u << i));
  }
  return code;
}

int lbp_transitions(std::uint8_t code) noexcept {
  const auto rotated = static_cast<std::uint8_t>((code >> 1) | (code << 7));
  return std::popcount(static_cast<unsigned>(code ^ rotated));
}

int lbp_uniform_bin(std::uint8_t code) noexcept { return kUniformTable[code]; }

FeatureVector extract_features(const Slice& s, const Slice& saliency, const CandidateRegion& r,
                               const LayerBoundaries* layers) {
  if (r.area < 4 || r.pixels.size() < 4) throw Error(ErrorCode::DegenerateRegion, "region smaller than 4 pixels");
  if (!saliency.same_shape(s)) throw Error(ErrorCode::DimensionMismatch, "saliency map does not match the slice");
  const int w = s.width();
  const int h = s.height();
  const int x0 = std::max(0, r.bbox.x_min - kPatchPadding);
  const int x1 = std::min(w - 1, r.bbox.x_max + kPatchPadding);
  const int y0 = std::max(0, r.bbox.y_min - kPatchPadding);
  const int y1 = std::min(h - 1, r.bbox.y_max + kPatchPadding);
  if (x0 > x1 || y0 > y1) throw Error(ErrorCode::DegenerateRegion, "bounding box outside the slice");

  // Quantized copy of the patch plus a one-pixel ring where the slice allows.
  const int qx0 = std::max(0, x0 - 1);
  const int qy0 = std::max(0, y0 - 1);
  const int qx1 = std::min(w - 1, x1 + 1);
  const int qy1 = std::min(h - 1, y1 + 1);
  Image8 local(qx1 - qx0 + 1, qy1 - qy0 + 1);
  for (int y = qy0; y <= qy1; ++y) {
    for (int x = qx0; x <= qx1; ++x) {
      local(x - qx0, y - qy0) =
          static_cast<std::uint8_t>(std::clamp(std::lround(static_cast<double>(s(x, y)) * 255.0), 0L, 255L));
    }
  }

  FeatureVector f;
  std::array<double, kLbpBins> hist{};
  double sum = 0.0, grad = 0.0;
  double lo = 1e300, hi = -1e300;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      hist[static_cast<std::size_t>(lbp_uniform_bin(lbp_code(local, x - qx0, y - qy0)))] += 1.0;
      const double v = s(x, y);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      const double gx = 0.5 * (static_cast<double>(s(std::min(x + 1, w - 1), y)) - s(std::max(x - 1, 0), y));
      const double gy = 0.5 * (static_cast<double>(s(x, std::min(y + 1, h - 1))) - s(x, std::max(y - 1, 0)));
      grad += std::sqrt(gx * gx + gy * gy);
    }
  }
  const double n = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
  for (int b = 0; b < kLbpBins; ++b) f.values[static_cast<std::size_t>(b)] = hist[static_cast<std::size_t>(b)] / n;

  const double mean = sum / n;
  double cx = 0.0, cy = 0.0;
  for (int p : r.pixels) {
    cx += p % w;
    cy += p / w;
  }
  cx /= r.area;
  cy /= r.area;
  double depth = cy / h;
  if (layers && layers->ilm_row.size() == static_cast<std::size_t>(w)) {
    const auto col = static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(cx)), 0, w - 1));
    const double span = layers->rpe_row[col] - layers->ilm_row[col];
    if (span > 0) depth = (cy - layers->ilm_row[col]) / span;
  }

  auto set = [&f](Feature k, double v) { f.values[static_cast<std::size_t>(k)] = v; };
  set(Feature::PatchMean, mean);
  double var = 0.0;
  if (hi > lo) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) var += (s(x, y) - mean) * (s(x, y) - mean);
    }
    var /= n;
  }
  set(Feature::PatchStd, std::sqrt(var));
  set(Feature::PatchMin, lo);
  set(Feature::PatchMax, hi);
  set(Feature::RelativeArea, static_cast<double>(r.area) / (kNormalizedWidth * kNormalizedHeight));
  set(Feature::AspectRatio, static_cast<double>(r.bbox.width()) / r.bbox.height());
  set(Feature::FillRatio, static_cast<double>(r.area) / (static_cast<double>(r.bbox.width()) * r.bbox.height()));
  set(Feature::MeanSaliency, r.saliency_score);
  set(Feature::DepthInRetina, depth);
  set(Feature::MeanGradient, grad / n);
  return f;
}

}  // namespace cystseg
