#include "cystseg/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "cystseg/error.hpp"
#include "cystseg/keyvalue.hpp"
#include "cystseg/pgm.hpp"

namespace cystseg {
namespace fs = std::filesystem;

std::string_view to_string(Scanner s) noexcept {
  switch (s) {
    case Scanner::Spectralis: return "Spectralis";
    case Scanner::Cirrus: return "Cirrus";
    case Scanner::Topcon: return "Topcon";
    case Scanner::Nidek: return "Nidek";
    case Scanner::Synthetic: return "Synthetic";
  }
  return "Synthetic";
}

Scanner parse_scanner(std::string_view name) {
  for (Scanner s : {Scanner::Spectralis, Scanner::Cirrus, Scanner::Topcon, Scanner::Nidek, Scanner::Synthetic}) {
    std::string_view ref = to_string(s);
    if (ref.size() == name.size() &&
        std::equal(ref.begin(), ref.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return s;
    }
  }
  throw Error(ErrorCode::MalformedManifest, "unknown scanner '" + std::string(name) + "'");
}

namespace {

std::vector<fs::path> path_list(const std::string& value, const fs::path& base) {
  std::vector<fs::path> out;
  for (const auto& item : split(value, ',')) {
    if (item.empty()) throw Error(ErrorCode::MalformedManifest, "empty entry in path list");
    fs::path p(item);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

std::string join_relative(const std::vector<fs::path>& paths, const fs::path& base) {
  std::string out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i) out += ',';
    out += paths[i].lexically_relative(base).generic_string();
  }
  return out;
}

}  // namespace

VolumeManifest read_manifest(const fs::path& manifest_path, Warnings* warnings) {
  if (!fs::exists(manifest_path)) throw Error(ErrorCode::MissingFile, manifest_path.string() + " does not exist");
  const KeyValueFile kv = KeyValueFile::read(manifest_path);
  const fs::path base = manifest_path.parent_path();

  VolumeManifest m;
  bool have_slices = false;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "volume_id") {
      m.volume_id = value;
    } else if (key == "scanner") {
      m.scanner = parse_scanner(value);
    } else if (key == "slices") {
      m.slice_files = path_list(value, base);
      have_slices = true;
    } else if (key == "gt_grader1") {
      m.gt_files_g1 = path_list(value, base);
    } else if (key == "gt_grader2") {
      m.gt_files_g2 = path_list(value, base);
    } else if (warnings) {
      warnings->push_back(manifest_path.string() + ": ignoring unknown key '" + key + "'");
    }
  }
  if (!have_slices || m.slice_files.empty()) {
    throw Error(ErrorCode::MalformedManifest, manifest_path.string() + ": missing 'slices'");
  }
  if (m.volume_id.empty()) m.volume_id = manifest_path.parent_path().filename().string();
  for (const auto* gt : {&m.gt_files_g1, &m.gt_files_g2}) {
    if (*gt && (*gt)->size() != m.slice_files.size()) {
      throw Error(ErrorCode::DimensionMismatch, manifest_path.string() + ": ground-truth list has " +
                                                    std::to_string((*gt)->size()) + " entries for " +
                                                    std::to_string(m.slice_files.size()) + " slices");
    }
  }
  return m;
}

void write_manifest(const VolumeManifest& m, const fs::path& manifest_path) {
  const fs::path base = manifest_path.parent_path();
  KeyValueFile kv;
  kv.set("volume_id", m.volume_id);
  kv.set("scanner", std::string(to_string(m.scanner)));
  kv.set("slices", join_relative(m.slice_files, base));
  if (m.gt_files_g1) kv.set("gt_grader1", join_relative(*m.gt_files_g1, base));
  if (m.gt_files_g2) kv.set("gt_grader2", join_relative(*m.gt_files_g2, base));
  kv.write(manifest_path);
}

OctVolume load_volume(const VolumeManifest& manifest) {
  OctVolume v;
  v.volume_id = manifest.volume_id;
  v.scanner = manifest.scanner;
  v.scale = IntensityScale::Byte;
  v.slices.reserve(manifest.slice_files.size());
  for (const auto& file : manifest.slice_files) v.slices.push_back(to_slice(read_pgm(file), false));
  return v;
}

OctVolume load_volume(const fs::path& manifest_path, Warnings* warnings) {
  return load_volume(read_manifest(manifest_path, warnings));
}

std::optional<std::vector<BinaryMask>> load_union_ground_truth(const VolumeManifest& m, Warnings* warnings) {
  if (!m.has_ground_truth()) return std::nullopt;
  if (warnings && !(m.gt_files_g1 && m.gt_files_g2)) {
    warnings->push_back(m.volume_id + ": only one grader present; using it as the union");
  }
  std::vector<BinaryMask> out;
  out.reserve(m.slice_files.size());
  for (std::size_t i = 0; i < m.slice_files.size(); ++i) {
    std::optional<BinaryMask> g1, g2;
    if (m.gt_files_g1) g1 = read_mask((*m.gt_files_g1)[i], MaskSource::Grader1);
    if (m.gt_files_g2) g2 = read_mask((*m.gt_files_g2)[i], MaskSource::Grader2);
    const BinaryMask& present = g1 ? *g1 : *g2;
    const BinaryMask other = (g1 && g2) ? *g2 : BinaryMask(present.width(), present.height(), MaskSource::Grader2);
    out.push_back(union_graders(present, other));
  }
  return out;
}

Slice resize_bilinear(const Slice& s, int width, int height) {
  if (s.width() < 2 || s.height() < 2) {
    throw Error(ErrorCode::DegenerateSlice, "slice must be at least 2x2 to resample");
  }
  if (width <= 0 || height <= 0) throw Error(ErrorCode::DegenerateTarget, "target size must be positive");
  if (width == s.width() && height == s.height()) return s;

  const double sx = static_cast<double>(s.width()) / width;
  const double sy = static_cast<double>(s.height()) / height;
  Slice out(width, height);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(s.height() - 1));
    const int y0 = std::min(static_cast<int>(fy), s.height() - 2);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(s.width() - 1));
      const int x0 = std::min(static_cast<int>(fx), s.width() - 2);
      const double tx = fx - x0;
      const double top = (1.0 - tx) * s(x0, y0) + tx * s(x0 + 1, y0);
      const double bottom = (1.0 - tx) * s(x0, y0 + 1) + tx * s(x0 + 1, y0 + 1);
      out(x, y) = static_cast<float>((1.0 - ty) * top + ty * bottom);
    }
  }
  return out;
}

OctVolume normalize_size(const OctVolume& v) {
  OctVolume out;
  out.volume_id = v.volume_id;
  out.scanner = v.scanner;
  out.scale = v.scale;
  out.slices.reserve(v.slices.size());
  for (const auto& s : v.slices) {
    Slice r = resize_bilinear(s, kNormalizedWidth, kNormalizedHeight);
    if (v.scale == IntensityScale::Byte && !(r.width() == s.width() && r.height() == s.height())) {
      for (auto& px : r.pixels()) px = std::round(px);
    }
    out.slices.push_back(std::move(r));
  }
  return out;
}

BinaryMask resize_mask(const BinaryMask& m, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::DegenerateTarget, "target size must be positive");
  if (m.width() <= 0 || m.height() <= 0) throw Error(ErrorCode::DegenerateSlice, "empty mask");
  BinaryMask out(width, height, m.source());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * m.height() / height), m.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * m.width() / width), m.width() - 1);
      out.set(x, y, m(sx, sy));
    }
  }
  return out;
}

BinaryMask union_graders(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "grader masks differ in size");
  }
  BinaryMask out(a.width(), a.height(), MaskSource::Union);
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, a[i] || b[i]);
  return out;
}

OctVolume to_unit_scale(const OctVolume& v) {
  if (v.scale == IntensityScale::Unit) return v;
  OctVolume out = v;
  out.scale = IntensityScale::Unit;
  for (auto& s : out.slices) {
    for (auto& px : s.pixels()) px = px / 255.0f;
  }
  return out;
}

}  // namespace cystseg
