#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cystseg/image.hpp"

namespace cystseg {

/// Normalized slice grid: 512 columns (lateral) by 256 rows (depth).
inline constexpr int kNormalizedWidth = 512;
inline constexpr int kNormalizedHeight = 256;

enum class Scanner { Spectralis, Cirrus, Topcon, Nidek, Synthetic };

std::string_view to_string(Scanner s) noexcept;
Scanner parse_scanner(std::string_view name);

/// Which intensity convention the slices use.
enum class IntensityScale { Byte, Unit };

struct OctVolume {
  std::string volume_id;
  Scanner scanner = Scanner::Synthetic;
  IntensityScale scale = IntensityScale::Byte;
  std::vector<Slice> slices;
};

using Warnings = std::vector<std::string>;

struct VolumeManifest {
  std::string volume_id;
  Scanner scanner = Scanner::Synthetic;
  std::vector<std::filesystem::path> slice_files;
  std::optional<std::vector<std::filesystem::path>> gt_files_g1;
  std::optional<std::vector<std::filesystem::path>> gt_files_g2;

  bool has_ground_truth() const noexcept { return gt_files_g1 || gt_files_g2; }
};

/// Parses a manifest. Relative paths are resolved against the manifest's
/// directory. Unknown keys produce a warning.
VolumeManifest read_manifest(const std::filesystem::path& manifest_path, Warnings* warnings = nullptr);

/// Writes a manifest with paths made relative to the manifest's directory.
void write_manifest(const VolumeManifest& manifest, const std::filesystem::path& manifest_path);

/// Loads slices in manifest order at native resolution, Byte scale.
OctVolume load_volume(const std::filesystem::path& manifest_path, Warnings* warnings = nullptr);
OctVolume load_volume(const VolumeManifest& manifest);

/// Union-of-graders ground truth for every slice, or nullopt if the manifest
/// carries none. A single grader is unioned with an all-false mask and a
/// warning is recorded.
std::optional<std::vector<BinaryMask>> load_union_ground_truth(const VolumeManifest& manifest,
                                                               Warnings* warnings = nullptr);

/// Bilinear resampling of every slice to 512x256. Byte-scale volumes are
/// rounded back to integers so they remain 8-bit representable.
OctVolume normalize_size(const OctVolume& v);

/// Bilinear resampling of a single slice (pixel-center aligned).
Slice resize_bilinear(const Slice& s, int width, int height);

/// Nearest-neighbour resampling, which keeps the mask binary.
BinaryMask resize_mask(const BinaryMask& m, int width, int height);

/// Pixelwise OR. The result is tagged as a Union mask.
BinaryMask union_graders(const BinaryMask& a, const BinaryMask& b);

/// Byte-scale slices divided by 255; Unit volumes are returned unchanged.
OctVolume to_unit_scale(const OctVolume& v);

}  // namespace cystseg
