#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pricefusion/keyvalue.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// One cellphone row as it appears in the source CSV.
struct RawRecord {
  std::string brand;
  std::string model;
  std::string release_date;
  std::string weight;
  std::string os;
  std::string storage;
  std::string display_size;
  std::string display_resolution;
  std::string camera;
  std::string video;
  std::string processor;
  std::string ram;
  std::string battery;
  std::string battery_type;
  std::string image_path;
  double price_euro = 0.0;
  std::string hit;        // carried, never encoded
  std::string hit_count;  // carried, never encoded
  std::size_t source_row = 0;  ///< 0-based data row in the source CSV
};

/// A record that cannot be encoded. `field()` names the offending column.
class RecordError : public std::invalid_argument {
 public:
  RecordError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct Resolution {
  int vertical = 0;
  int horizontal = 0;
};

/// First decimal number in `s` ("190 g" -> 190). Throws RecordError("weight").
double parse_weight(std::string_view s);
/// "<int> x <int>" anywhere in `s`; 'x', 'X' and U+00D7 are accepted.
Resolution split_resolution(std::string_view s);
/// Leading integer of a video mode ("1080p@30fps" -> 1080).
int parse_video(std::string_view s);
/// Memory size in megabytes. GB and TB are scaled by 1024; a bare number is GB.
int parse_ram(std::string_view s);
/// Storage in megabytes, same unit rules as parse_ram.
double parse_storage(std::string_view s);
/// First number in `s`; errors name `field`.
double parse_leading_number(std::string_view s, std::string_view field);
/// First plausible four-digit year (1900-2099).
int parse_release_year(std::string_view s);
/// 0: p < 250, 1: p < 500, 2: p < 750, 3 otherwise. Throws on p <= 0.
int price_class(double price_euro);

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF, embedded newlines.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

/// Lower-cases and collapses non-alphanumerics to '_', then applies aliases
/// ("Price (Euro)" -> price_euro, "Operation System" -> os, "Picture" -> image_path).
std::string normalize_header(std::string_view name);

struct CsvLoad {
  std::vector<RawRecord> records;
  std::vector<std::string> rejected;  ///< one "row N: reason" line per skipped row
};

/// Reads records; rows with the wrong field count or an unusable price are
/// skipped and reported in `rejected`. Throws IoError on a missing column.
CsvLoad load_records(std::istream& in, std::string_view origin = "<csv>");
CsvLoad load_records(const std::filesystem::path& path);

/// Fitted feature layout: four one-hot blocks followed by min-max scaled numerics.
struct EncoderSpec {
  static constexpr std::size_t kOsCap = 20;
  static constexpr std::size_t kProcessorCap = 26;
  static constexpr const char* kOther = "OTHER";

  // Each vocabulary ends with kOther.
  std::vector<std::string> brand;
  std::vector<std::string> os;
  std::vector<std::string> processor;
  std::vector<std::string> battery_type;
  std::vector<std::string> numeric_names;
  std::vector<double> numeric_min;
  std::vector<double> numeric_max;

  std::size_t width() const noexcept;
  std::vector<std::string> feature_names() const;

  void store(KeyValueFile& kv) const;
  static EncoderSpec restore(const KeyValueFile& kv);
};

/// Numeric and categorical values extracted from a valid record.
struct ParsedRecord {
  std::string brand, os, processor, battery_type;
  std::vector<double> numerics;  ///< in EncoderSpec::numeric_names order (diagonal last when present)
  double display_diagonal = 0.0;
  bool has_display_diagonal = false;
  int label = 0;
};

/// Validates and parses every field; throws RecordError on the first failure.
ParsedRecord parse_record(const RawRecord& record);

/// Vocabularies (frequency then lexicographic order) and min/max from `train`.
/// The display diagonal column is used only when every training record has one.
EncoderSpec fit_encoder(const std::vector<RawRecord>& train);

struct FeatureVector {
  Tensor values;  ///< [D]
  int label = 0;
};

FeatureVector encode(const RawRecord& record, const EncoderSpec& spec);

}  // namespace pricefusion
