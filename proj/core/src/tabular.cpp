#include "pricefusion/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <unordered_map>

#include "pricefusion/tensor_io.hpp"

namespace pricefusion {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

struct NumberAt {
  double value = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// First run of digits, optionally with one decimal point ("1,234" is read as 1).
std::optional<NumberAt> first_number(std::string_view s, std::size_t from = 0) {
  std::size_t i = from;
  while (i < s.size() && !is_digit(s[i])) ++i;
  if (i == s.size()) return std::nullopt;
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
    ++j;
    while (j < s.size() && is_digit(s[j])) ++j;
  }
  NumberAt n;
  n.begin = i;
  n.end = j;
  std::from_chars(s.data() + i, s.data() + j, n.value);
  return n;
}

std::optional<long long> first_integer(std::string_view s, std::size_t from, std::size_t* end) {
  std::size_t i = from;
  while (i < s.size() && !is_digit(s[i])) ++i;
  if (i == s.size()) return std::nullopt;
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, v);
  if (ec != std::errc{}) return std::nullopt;
  if (end) *end = j;
  return v;
}

std::string clean_category(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::string lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = lower(c);
  return out;
}

// Multiplier to megabytes for the first unit token after a number.
double memory_unit(std::string_view rest) {
  const std::string r = lowered(rest);
  std::size_t i = 0;
  while (i < r.size() && r[i] == ' ') ++i;
  const std::string_view unit = std::string_view(r).substr(i);
  if (unit.starts_with("tb")) return 1024.0 * 1024.0;
  if (unit.starts_with("gb")) return 1024.0;
  if (unit.starts_with("mb")) return 1.0;
  return 1024.0;
}

double parse_memory(std::string_view s, std::string_view field) {
  auto n = first_number(s);
  if (!n) throw RecordError(std::string(field), "no number in '" + std::string(s) + "'");
  return n->value * memory_unit(s.substr(n->end));
}

void require_category(const std::string& value, std::string_view field) {
  if (value.empty()) throw RecordError(std::string(field), "empty value");
}

std::vector<std::string> fit_vocabulary(const std::vector<std::string>& values, std::size_t cap) {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : values) ++counts[v];
  counts.erase(EncoderSpec::kOther);
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> vocab;
  const std::size_t keep = cap == 0 ? ranked.size() : std::min(ranked.size(), cap - 1);
  for (std::size_t i = 0; i < keep; ++i) vocab.push_back(ranked[i].first);
  vocab.emplace_back(EncoderSpec::kOther);
  return vocab;
}

std::size_t slot(const std::vector<std::string>& vocab, const std::string& value) {
  for (std::size_t i = 0; i + 1 < vocab.size(); ++i) {
    if (vocab[i] == value) return i;
  }
  return vocab.size() - 1;
}

const std::vector<std::string> kBaseNumerics = {"weight", "storage", "v_resolution", "h_resolution", "camera",
                                                "video",  "ram",     "battery",      "release_year"};

const std::vector<std::string> kRequiredColumns = {
    "brand", "release_date", "weight", "os", "storage", "display_resolution", "camera",
    "video", "processor",    "ram",    "battery", "battery_type", "price_euro"};

}  // namespace

RecordError::RecordError(std::string field, const std::string& message)
    : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

double parse_weight(std::string_view s) {
  auto n = first_number(s);
  if (!n) throw RecordError("weight", "no digits in '" + std::string(s) + "'");
  return n->value;
}

Resolution split_resolution(std::string_view s) {
  std::size_t pos = 0;
  while (true) {
    std::size_t end = 0;
    auto a = first_integer(s, pos, &end);
    if (!a) break;
    std::size_t i = end;
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t after_sep = 0;
    if (i < s.size() && (s[i] == 'x' || s[i] == 'X')) {
      after_sep = i + 1;
    } else if (s.substr(i).starts_with("\xC3\x97")) {
      after_sep = i + 2;
    }
    if (after_sep) {
      std::size_t j = after_sep;
      while (j < s.size() && s[j] == ' ') ++j;
      if (j < s.size() && is_digit(s[j])) {
        auto b = first_integer(s, j, nullptr);
        if (b && *a > 0 && *b > 0 && *a <= 1'000'000 && *b <= 1'000'000) {
          return {static_cast<int>(*a), static_cast<int>(*b)};
        }
      }
    }
    pos = end;
  }
  throw RecordError("display_resolution", "expected '<int> x <int>' in '" + std::string(s) + "'");
}

int parse_video(std::string_view s) {
  std::size_t end = 0;
  auto v = first_integer(s, 0, &end);
  if (!v || *v <= 0 || *v > 100'000) throw RecordError("video", "no resolution in '" + std::string(s) + "'");
  return static_cast<int>(*v);
}

int parse_ram(std::string_view s) {
  const double mb = parse_memory(s, "ram");
  if (!(mb > 0.0) || mb > 1e9) throw RecordError("ram", "out of range '" + std::string(s) + "'");
  return static_cast<int>(std::lround(mb));
}

double parse_storage(std::string_view s) {
  const double mb = parse_memory(s, "storage");
  if (!(mb > 0.0)) throw RecordError("storage", "out of range '" + std::string(s) + "'");
  return mb;
}

double parse_leading_number(std::string_view s, std::string_view field) {
  auto n = first_number(s);
  if (!n) throw RecordError(std::string(field), "no number in '" + std::string(s) + "'");
  return n->value;
}

int parse_release_year(std::string_view s) {
  for (std::size_t i = 0; i + 4 <= s.size(); ++i) {
    if (i > 0 && is_digit(s[i - 1])) continue;
    bool four = is_digit(s[i]) && is_digit(s[i + 1]) && is_digit(s[i + 2]) && is_digit(s[i + 3]);
    if (!four || (i + 4 < s.size() && is_digit(s[i + 4]))) continue;
    const int year = (s[i] - '0') * 1000 + (s[i + 1] - '0') * 100 + (s[i + 2] - '0') * 10 + (s[i + 3] - '0');
    if (year >= 1900 && year <= 2099) return year;
  }
  throw RecordError("release_date", "no year in '" + std::string(s) + "'");
}

int price_class(double price_euro) {
  if (!(price_euro > 0.0) || !std::isfinite(price_euro)) {
    throw RecordError("price_euro", "price must be positive, got " + format_double(price_euro));
  }
  if (price_euro < 250.0) return 0;
  if (price_euro < 500.0) return 1;
  if (price_euro < 750.0) return 2;
  return 3;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (any) end_row();
  if (!rows.empty() && !rows[0].empty() && rows[0][0].starts_with("\xEF\xBB\xBF")) rows[0][0].erase(0, 3);
  return rows;
}

std::string normalize_header(std::string_view name) {
  std::string out;
  for (char c : name) {
    const char l = lower(c);
    if ((l >= 'a' && l <= 'z') || is_digit(l)) {
      out += l;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  static const std::unordered_map<std::string, std::string> aliases = {
      {"operation_system", "os"},      {"operating_system", "os"}, {"price", "price_euro"},
      {"price_eur", "price_euro"},     {"picture", "image_path"},  {"image", "image_path"},
      {"release", "release_date"},     {"resolution", "display_resolution"},
      {"hitcount", "hit_count"},       {"memory", "ram"}};
  if (auto it = aliases.find(out); it != aliases.end()) return it->second;
  return out;
}

CsvLoad load_records(std::istream& in, std::string_view origin) {
  const auto rows = read_csv(in);
  if (rows.empty()) throw IoError(std::string(origin) + ": empty CSV");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows[0].size(); ++i) column.emplace(normalize_header(rows[0][i]), i);
  for (const auto& name : kRequiredColumns) {
    if (!column.contains(name)) throw IoError(std::string(origin) + ": missing column '" + name + "'");
  }
  auto field = [&](const std::vector<std::string>& row, std::string_view name) -> std::string {
    auto it = column.find(std::string(name));
    return it == column.end() ? std::string{} : row[it->second];
  };
  CsvLoad out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t data_row = r - 1;
    if (row.size() != rows[0].size()) {
      out.rejected.push_back("row " + std::to_string(data_row) + ": expected " + std::to_string(rows[0].size()) +
                             " fields, got " + std::to_string(row.size()));
      continue;
    }
    RawRecord rec;
    rec.source_row = data_row;
    rec.brand = field(row, "brand");
    rec.model = field(row, "model");
    rec.release_date = field(row, "release_date");
    rec.weight = field(row, "weight");
    rec.os = field(row, "os");
    rec.storage = field(row, "storage");
    rec.display_size = field(row, "display_size");
    rec.display_resolution = field(row, "display_resolution");
    rec.camera = field(row, "camera");
    rec.video = field(row, "video");
    rec.processor = field(row, "processor");
    rec.ram = field(row, "ram");
    rec.battery = field(row, "battery");
    rec.battery_type = field(row, "battery_type");
    rec.image_path = field(row, "image_path");
    rec.hit = field(row, "hit");
    rec.hit_count = field(row, "hit_count");
    const std::string price = field(row, "price_euro");
    try {
      rec.price_euro = parse_leading_number(price, "price_euro");
      if (const auto digit = price.find_first_of("0123456789"); price.substr(0, digit).find('-') != std::string::npos) {
        rec.price_euro = -rec.price_euro;
      }
      price_class(rec.price_euro);
    } catch (const RecordError& e) {
      out.rejected.push_back("row " + std::to_string(data_row) + ": " + e.what());
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

CsvLoad load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_records(in, path.string());
}

ParsedRecord parse_record(const RawRecord& record) {
  ParsedRecord p;
  p.brand = clean_category(record.brand);
  p.os = clean_category(record.os);
  p.processor = clean_category(record.processor);
  p.battery_type = clean_category(record.battery_type);
  require_category(p.brand, "brand");
  require_category(p.os, "os");
  require_category(p.processor, "processor");
  require_category(p.battery_type, "battery_type");
  const Resolution res = split_resolution(record.display_resolution);
  p.numerics = {parse_weight(record.weight),
                parse_storage(record.storage),
                static_cast<double>(res.vertical),
                static_cast<double>(res.horizontal),
                parse_leading_number(record.camera, "camera"),
                static_cast<double>(parse_video(record.video)),
                static_cast<double>(parse_ram(record.ram)),
                parse_leading_number(record.battery, "battery"),
                static_cast<double>(parse_release_year(record.release_date))};
  // A diagonal only counts when the field is a plain size, not a "w x h" pair.
  if (auto n = first_number(record.display_size)) {
    bool pair = false;
    try {
      split_resolution(record.display_size);
      pair = true;
    } catch (const RecordError&) {
    }
    if (!pair) {
      p.display_diagonal = n->value;
      p.has_display_diagonal = true;
    }
  }
  p.label = price_class(record.price_euro);
  return p;
}

std::size_t EncoderSpec::width() const noexcept {
  return brand.size() + os.size() + processor.size() + battery_type.size() + numeric_names.size();
}

std::vector<std::string> EncoderSpec::feature_names() const {
  std::vector<std::string> names;
  for (const auto& v : brand) names.push_back("brand=" + v);
  for (const auto& v : os) names.push_back("os=" + v);
  for (const auto& v : processor) names.push_back("processor=" + v);
  for (const auto& v : battery_type) names.push_back("battery_type=" + v);
  for (const auto& n : numeric_names) names.push_back(n);
  return names;
}

void EncoderSpec::store(KeyValueFile& kv) const {
  auto vocab = [&](const std::string& name, const std::vector<std::string>& values) {
    kv.set("encoder." + name + ".size", static_cast<std::uint64_t>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) kv.set("encoder." + name + "." + std::to_string(i), values[i]);
  };
  vocab("brand", brand);
  vocab("os", os);
  vocab("processor", processor);
  vocab("battery_type", battery_type);
  kv.set("encoder.numeric.size", static_cast<std::uint64_t>(numeric_names.size()));
  for (std::size_t i = 0; i < numeric_names.size(); ++i) {
    const std::string key = "encoder.numeric." + std::to_string(i);
    kv.set(key + ".name", numeric_names[i]);
    kv.set(key + ".min", numeric_min[i]);
    kv.set(key + ".max", numeric_max[i]);
  }
}

EncoderSpec EncoderSpec::restore(const KeyValueFile& kv) {
  EncoderSpec spec;
  auto vocab = [&](const std::string& name) {
    std::vector<std::string> values;
    const auto n = kv.get_uint("encoder." + name + ".size");
    for (std::uint64_t i = 0; i < n; ++i) values.push_back(kv.get("encoder." + name + "." + std::to_string(i)));
    if (values.empty() || values.back() != kOther) {
      throw IoError("encoder vocabulary '" + name + "' must end with " + kOther);
    }
    return values;
  };
  spec.brand = vocab("brand");
  spec.os = vocab("os");
  spec.processor = vocab("processor");
  spec.battery_type = vocab("battery_type");
  const auto n = kv.get_uint("encoder.numeric.size");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string key = "encoder.numeric." + std::to_string(i);
    spec.numeric_names.push_back(kv.get(key + ".name"));
    spec.numeric_min.push_back(kv.get_double(key + ".min"));
    spec.numeric_max.push_back(kv.get_double(key + ".max"));
  }
  return spec;
}

EncoderSpec fit_encoder(const std::vector<RawRecord>& train) {
  if (train.empty()) throw std::invalid_argument("fit_encoder: empty training set");
  std::vector<ParsedRecord> parsed;
  parsed.reserve(train.size());
  for (const auto& r : train) parsed.push_back(parse_record(r));
  std::vector<std::string> brands, oses, processors, batteries;
  bool all_diagonal = true;
  for (const auto& p : parsed) {
    brands.push_back(p.brand);
    oses.push_back(p.os);
    processors.push_back(p.processor);
    batteries.push_back(p.battery_type);
    all_diagonal = all_diagonal && p.has_display_diagonal;
  }
  EncoderSpec spec;
  spec.brand = fit_vocabulary(brands, 0);
  spec.os = fit_vocabulary(oses, EncoderSpec::kOsCap);
  spec.processor = fit_vocabulary(processors, EncoderSpec::kProcessorCap);
  spec.battery_type = fit_vocabulary(batteries, 0);
  spec.numeric_names = kBaseNumerics;
  if (all_diagonal) spec.numeric_names.emplace_back("display_size");
  const std::size_t cols = spec.numeric_names.size();
  spec.numeric_min.assign(cols, INFINITY);
  spec.numeric_max.assign(cols, -INFINITY);
  for (const auto& p : parsed) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = c < p.numerics.size() ? p.numerics[c] : p.display_diagonal;
      spec.numeric_min[c] = std::min(spec.numeric_min[c], v);
      spec.numeric_max[c] = std::max(spec.numeric_max[c], v);
    }
  }
  return spec;
}

FeatureVector encode(const RawRecord& record, const EncoderSpec& spec) {
  const ParsedRecord p = parse_record(record);
  const std::size_t cols = spec.numeric_names.size();
  if (cols > kBaseNumerics.size() && !p.has_display_diagonal) {
    throw RecordError("display_size", "missing diagonal size '" + record.display_size + "'");
  }
  FeatureVector out{Tensor(Shape{spec.width()}), p.label};
  auto values = out.values.data();
  std::size_t offset = 0;
  auto one_hot = [&](const std::vector<std::string>& vocab, const std::string& value) {
    values[offset + slot(vocab, value)] = 1.0f;
    offset += vocab.size();
  };
  one_hot(spec.brand, p.brand);
  one_hot(spec.os, p.os);
  one_hot(spec.processor, p.processor);
  one_hot(spec.battery_type, p.battery_type);
  for (std::size_t c = 0; c < cols; ++c) {
    const double v = c < p.numerics.size() ? p.numerics[c] : p.display_diagonal;
    const double lo = spec.numeric_min[c], hi = spec.numeric_max[c];
    values[offset + c] = hi > lo ? static_cast<float>((v - lo) / (hi - lo)) : 0.0f;
  }
  return out;
}

}  // namespace pricefusion
