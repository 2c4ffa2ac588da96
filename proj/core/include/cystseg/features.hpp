#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "cystseg/image.hpp"
#include "cystseg/layers.hpp"
#include "cystseg/mser.hpp"

namespace cystseg {

inline constexpr int kLbpBins = 59;
inline constexpr int kAuxFeatures = 10;
inline constexpr int kFeatureCount = kLbpBins + kAuxFeatures;
/// Padding added around a candidate's bounding box before extraction.
inline constexpr int kPatchPadding = 4;

/// Offsets of the LBP(8,1) neighbours; bit i of a code is neighbour i,
/// clockwise from the top-left.
inline constexpr std::array<std::array<int, 2>, 8> kLbpNeighbours{{
    {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};

/// 8-bit LBP code: bit i set when neighbour i is strictly brighter than the
/// centre. Neighbours outside the image take the centre's value.
std::uint8_t lbp_code(const Image8& image, int x, int y);

/// Number of 0/1 transitions around the circular 8-bit pattern.
int lbp_transitions(std::uint8_t code) noexcept;

/// Uniform-pattern bin: the 58 uniform codes map to 0..57 in increasing
/// code order, everything else to 58.
int lbp_uniform_bin(std::uint8_t code) noexcept;

enum class Feature : int {
  PatchMean = kLbpBins,
  PatchStd,
  PatchMin,
  PatchMax,
  RelativeArea,
  AspectRatio,
  FillRatio,
  MeanSaliency,
  DepthInRetina,
  MeanGradient,
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](Feature f) const noexcept { return values[static_cast<std::size_t>(f)]; }
  double operator[](std::size_t i) const noexcept { return values[i]; }
};

/// Texture histogram over the bounding box padded by four pixels (clamped to
/// the slice), followed by ten scalar descriptors. `layers`, when present,
/// places the centroid depth relative to ILM/RPE; otherwise relative to the
/// slice height. Throws DegenerateRegion for regions smaller than 4 pixels.
FeatureVector extract_features(const Slice& s, const Slice& saliency, const CandidateRegion& r,
                               const LayerBoundaries* layers = nullptr);

}  // namespace cystseg
