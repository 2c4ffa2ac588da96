#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cystseg/error.hpp"

namespace cystseg {

/// Row-major single channel image. The pixel buffer always holds exactly
/// width * height values.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::InvalidArgument, "negative image dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Image(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorCode::DimensionMismatch, "pixel buffer length does not equal width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// One B-scan. Intensities are either 0..255 or 0..1 depending on the owning
/// volume's scale.
using Slice = Image<float>;
using Image8 = Image<std::uint8_t>;

enum class MaskSource { Grader1, Grader2, Union, Prediction };

/// Per-slice binary cyst mask. Bits are stored one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, MaskSource source = MaskSource::Prediction)
      : bits_(width, height, 0), source_(source) {}
  BinaryMask(Image8 bits, MaskSource source) : bits_(std::move(bits)), source_(source) {
    for (auto& b : bits_.pixels()) b = b ? 1 : 0;
  }

  int width() const noexcept { return bits_.width(); }
  int height() const noexcept { return bits_.height(); }
  std::size_t size() const noexcept { return bits_.size(); }
  MaskSource source() const noexcept { return source_; }
  void set_source(MaskSource s) noexcept { source_ = s; }

  bool operator()(int x, int y) const noexcept { return bits_(x, y) != 0; }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(int x, int y, bool v = true) noexcept { bits_(x, y) = v ? 1 : 0; }
  void set(std::size_t i, bool v = true) noexcept { bits_[i] = v ? 1 : 0; }
  bool contains(int x, int y) const noexcept { return bits_.contains(x, y); }
  std::size_t index(int x, int y) const noexcept { return bits_.index(x, y); }

  std::size_t count() const noexcept;
  const Image8& bits() const noexcept { return bits_; }

  /// Pixel equality; the provenance tag is not compared.
  bool same_pixels(const BinaryMask& other) const noexcept { return bits_ == other.bits_; }

 private:
  Image8 bits_;
  MaskSource source_ = MaskSource::Prediction;
};

}  // namespace cystseg
