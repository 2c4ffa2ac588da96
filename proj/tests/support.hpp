#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "cystseg/image.hpp"
#include "cystseg/random.hpp"

namespace testing {

// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("cystseg_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline cystseg::BinaryMask random_mask(int w, int h, double p, cystseg::Rng& rng) {
  cystseg::BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < p);
  return m;
}

inline cystseg::Slice random_slice(int w, int h, cystseg::Rng& rng) {
  cystseg::Slice s(w, h);
  for (auto& v : s.pixels()) v = static_cast<float>(rng.uniform());
  return s;
}

}  // namespace testing
