#include "pricefusion/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pricefusion/tensor_io.hpp"

namespace pricefusion {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a non-negative integer: '" + std::string(text) + "'");
  }
  return v;
}

std::string join_sizes(const std::vector<std::size_t>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<std::size_t> split_sizes(std::string_view text, char sep) {
  std::vector<std::size_t> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(static_cast<std::size_t>(parse_uint(text.substr(start, pos - start))));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

KeyValueFile KeyValueFile::parse(std::string_view text, std::string_view origin) {
  KeyValueFile kv;
  kv.origin_ = std::string(origin);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      kv.entries_.emplace_back("", std::string(trim(line.substr(1))));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
      throw IoError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    kv.entries_.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValueFile::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void KeyValueFile::set(std::string key, double value) { set(std::move(key), format_double(value)); }

void KeyValueFile::set(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }

void KeyValueFile::comment(std::string text) { entries_.emplace_back("", std::move(text)); }

bool KeyValueFile::contains(std::string_view key) const { return find(key).has_value(); }

std::optional<std::string> KeyValueFile::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (!k.empty() && k == key) return v;
  }
  return std::nullopt;
}

std::string KeyValueFile::get(std::string_view key) const {
  auto v = find(key);
  if (!v) throw IoError(origin_ + ": missing key '" + std::string(key) + "'");
  return *v;
}

double KeyValueFile::get_double(std::string_view key) const {
  try {
    return parse_double(get(key));
  } catch (const std::invalid_argument& e) {
    throw IoError(origin_ + ": key '" + std::string(key) + "': " + e.what());
  }
}

std::uint64_t KeyValueFile::get_uint(std::string_view key) const {
  try {
    return parse_uint(get(key));
  } catch (const std::invalid_argument& e) {
    throw IoError(origin_ + ": key '" + std::string(key) + "': " + e.what());
  }
}

std::string KeyValueFile::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    if (k.empty()) {
      out += "# " + v + "\n";
    } else {
      out += k + "=" + v + "\n";
    }
  }
  return out;
}

void KeyValueFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << str();
}

}  // namespace pricefusion
