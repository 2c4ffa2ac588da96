#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cystseg {

/// `key = value` text, one pair per line. Blank lines and lines starting with
/// '#' are skipped. Order is preserved; duplicate keys keep the last value.
class KeyValueFile {
 public:
  using Entry = std::pair<std::string, std::string>;

  static KeyValueFile parse(std::string_view text);
  static KeyValueFile read(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  const std::string* find(std::string_view key) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<Entry> entries_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Locale-independent shortest round-trip formatting of a double.
std::string format_double(double v);
/// Fixed-point formatting used in reports.
std::string format_fixed(double v, int digits);

double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

}  // namespace cystseg
