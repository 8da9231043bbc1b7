#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// Ordered flat `key=value` document. Lines starting with '#' are comments.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValueFile load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void set(std::string key, std::uint64_t value);
  void set(std::string key, int value) { set(std::move(key), static_cast<std::uint64_t>(value)); }
  void comment(std::string text);

  bool contains(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;
  /// Throws IoError naming the key when absent or malformed.
  std::string get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::string origin_ = "<memory>";
  // Comments are stored with an empty key.
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest round-trip decimal text for a double.
std::string format_double(double value);
double parse_double(std::string_view text);
std::uint64_t parse_uint(std::string_view text);

std::string join_sizes(const std::vector<std::size_t>& values, char sep);
std::vector<std::size_t> split_sizes(std::string_view text, char sep);

}  // namespace pricefusion
