#include "cystseg/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "cystseg/error.hpp"

namespace cystseg {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string t = next_token(in);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos || t.size() > 9) {
    throw Error(ErrorCode::UnsupportedImageFormat, "bad PGM header in " + path.string());
  }
  return std::stoi(t);
}

}  // namespace

Image8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  if (next_token(in) != "P5") {
    throw Error(ErrorCode::UnsupportedImageFormat, path.string() + " is not a binary (P5) PGM");
  }
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval != 255) {
    throw Error(ErrorCode::UnsupportedImageFormat, path.string() + ": only 8-bit PGM (maxval 255) is supported");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::UnsupportedImageFormat, path.string() + ": empty image");
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw Error(ErrorCode::UnsupportedImageFormat, path.string() + ": truncated pixel data");
  }
  return Image8(width, height, std::move(data));
}

void write_pgm(const Image8& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data().data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Image8 quantize(const Slice& s, bool unit) {
  Image8 out(s.width(), s.height());
  const double scale = unit ? 255.0 : 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = std::round(static_cast<double>(s[i]) * scale);
    out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

Slice to_slice(const Image8& image, bool unit) {
  Slice out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = unit ? static_cast<float>(image[i]) / 255.0f : static_cast<float>(image[i]);
  }
  return out;
}

BinaryMask read_mask(const std::filesystem::path& path, MaskSource source) {
  return BinaryMask(read_pgm(path), source);
}

void write_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  Image8 out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 255 : 0;
  write_pgm(out, path);
}

void write_ppm(const Image<Rgb8>& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (const auto& px : image.data()) {
    const char rgb[3] = {static_cast<char>(px.r), static_cast<char>(px.g), static_cast<char>(px.b)};
    out.write(rgb, 3);
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace cystseg
