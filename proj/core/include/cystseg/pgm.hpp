#pragma once

#include <filesystem>

#include "cystseg/image.hpp"

namespace cystseg {

/// Binary PGM (P5), maxval 255 only.
Image8 read_pgm(const std::filesystem::path& path);
void write_pgm(const Image8& image, const std::filesystem::path& path);

/// Slice values are rounded and clamped to 0..255; `unit` selects whether the
/// slice is 0..1 (scaled by 255) or already 0..255.
Image8 quantize(const Slice& s, bool unit);
Slice to_slice(const Image8& image, bool unit);

/// Masks on disk: 0 background, 255 cyst. Any nonzero value loads as true.
BinaryMask read_mask(const std::filesystem::path& path, MaskSource source);
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Binary PPM (P6) used for colour overlays.
struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};
void write_ppm(const Image<Rgb8>& image, const std::filesystem::path& path);

}  // namespace cystseg
