#pragma once

#include <vector>

#include "cystseg/image.hpp"

namespace cystseg {

struct PyramidLevel {
  int level = 0;
  Slice slice;
};

/// Level 0 is the input; each further level is blurred with the separable
/// binomial kernel [1 4 6 4 1]/16 (mirrored borders) and decimated by two.
/// Requires min(width, height) >= 8 * 2^(levels - 1).
std::vector<PyramidLevel> gaussian_pyramid(const Slice& s, int levels);

struct SaliencyParams {
  std::vector<int> centers{1, 2};
  std::vector<int> deltas{2, 3};
};

/// Dark-centre centre-surround map: mean over (c, c + d) pairs of
/// max(0, up(surround) - up(centre)), scaled so the maximum is 1.
Slice center_surround_dark(const Slice& s, const std::vector<int>& centers, const std::vector<int>& deltas);
inline Slice center_surround_dark(const Slice& s, const SaliencyParams& p = {}) {
  return center_surround_dark(s, p.centers, p.deltas);
}

/// Bilinear lookup of a pyramid level at full-resolution coordinates.
double sample_level(const Slice& level, int level_index, double x, double y);

}  // namespace cystseg
