#include "pricefusion/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pricefusion/optim.hpp"
#include "pricefusion/rng.hpp"
#include "pricefusion/tensor_io.hpp"

namespace pricefusion {
namespace {

template <typename T>
void write_lines(const std::filesystem::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& v : values) out << v << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<std::uint64_t> read_uint_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint64_t> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(parse_uint(line));
    } catch (const std::invalid_argument&) {
      throw IoError(path.string() + ":" + std::to_string(n) + ": not an integer '" + line + "'");
    }
  }
  return out;
}

void save_split(const std::filesystem::path& dir, const std::string& name, const DatasetSplit& s) {
  save_tensor(dir / (name + "_features.pft"), s.features);
  write_labels(dir / (name + "_labels.txt"), s.labels);
  write_rows(dir / (name + "_rows.txt"), s.rows);
  if (s.images) save_tensor(dir / (name + "_images.pft"), *s.images);
}

DatasetSplit load_split(const std::filesystem::path& dir, const std::string& name, bool images) {
  DatasetSplit s;
  s.features = load_tensor(dir / (name + "_features.pft"));
  s.labels = read_labels(dir / (name + "_labels.txt"));
  s.rows = read_rows(dir / (name + "_rows.txt"));
  if (images) s.images = load_tensor(dir / (name + "_images.pft"));
  return s;
}

void check_split(const DatasetSplit& s, const std::string& name, std::size_t width) {
  const std::size_t n = s.labels.size();
  if (s.features.rank() != 2 || s.features.dim(0) != n || (width && s.features.dim(1) != width)) {
    throw ShapeError(name + " features " + shape_string(s.features.shape()) + " do not match " + std::to_string(n) +
                     " labels of width " + std::to_string(width));
  }
  if (s.rows.size() != n) throw ShapeError(name + " row ids do not match label count");
  if (s.images && (s.images->rank() != 4 || s.images->dim(0) != n)) {
    throw ShapeError(name + " images " + shape_string(s.images->shape()) + " do not match " + std::to_string(n) +
                     " labels");
  }
  for (int y : s.labels) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) throw ShapeError(name + " label outside {0,1,2,3}");
  }
}

}  // namespace

std::string format_shape_hwc(const Shape& shape) { return join_sizes(shape, 'x'); }

Shape parse_shape_hwc(const std::string& text) {
  Shape s = split_sizes(text, 'x');
  if (s.size() != 3 || shape_size(s) == 0) throw ShapeError("expected HxWxC, got '" + text + "'");
  return s;
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) { write_lines(path, labels); }

std::vector<int> read_labels(const std::filesystem::path& path) {
  std::vector<int> out;
  for (auto v : read_uint_lines(path)) {
    if (v >= kNumClasses) throw IoError(path.string() + ": label " + std::to_string(v) + " outside {0,1,2,3}");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void write_rows(const std::filesystem::path& path, std::span<const std::size_t> rows) { write_lines(path, rows); }

std::vector<std::size_t> read_rows(const std::filesystem::path& path) {
  std::vector<std::size_t> out;
  for (auto v : read_uint_lines(path)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

std::optional<Shape> Dataset::image_shape() const {
  if (!train.images) return std::nullopt;
  const auto& s = train.images->shape();
  return Shape(s.begin() + 1, s.end());
}

void Dataset::validate() const {
  check_split(train, "train", 0);
  check_split(test, "test", feature_width());
  if (train.images.has_value() != test.images.has_value()) throw ShapeError("images present in only one split");
  if (train.images && test.images) {
    const Shape a(train.images->shape().begin() + 1, train.images->shape().end());
    const Shape b(test.images->shape().begin() + 1, test.images->shape().end());
    if (a != b) throw ShapeError("train images " + shape_string(a) + " vs test images " + shape_string(b));
  }
}

void Dataset::save(const std::filesystem::path& dir) {
  validate();
  std::filesystem::create_directories(dir);
  manifest.set("feature_width", static_cast<std::uint64_t>(feature_width()));
  manifest.set("train_rows", static_cast<std::uint64_t>(train.size()));
  manifest.set("test_rows", static_cast<std::uint64_t>(test.size()));
  const auto shape = image_shape();
  manifest.set("image_shape", shape ? format_shape_hwc(*shape) : std::string("none"));
  for (const auto* split : {&train, &test}) {
    const std::string name = split == &train ? "train" : "test";
    std::vector<std::uint64_t> counts(kNumClasses, 0);
    for (int y : split->labels) ++counts[static_cast<std::size_t>(y)];
    for (std::size_t c = 0; c < kNumClasses; ++c) manifest.set(name + ".class." + std::to_string(c), counts[c]);
  }
  manifest.save(dir / "manifest.txt");
  save_split(dir, "train", train);
  save_split(dir, "test", test);
}

Dataset Dataset::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  Dataset d;
  d.manifest = KeyValueFile::load(dir / "manifest.txt");
  const bool images = d.manifest.get("image_shape") != "none";
  d.train = load_split(dir, "train", images);
  d.test = load_split(dir, "test", images);
  d.validate();
  if (d.manifest.get_uint("feature_width") != d.feature_width() || d.manifest.get_uint("train_rows") != d.train.size() ||
      d.manifest.get_uint("test_rows") != d.test.size()) {
    throw ShapeError(dir.string() + ": manifest disagrees with the stored tensors");
  }
  return d;
}

SplitIndices stratified_split(std::span<const int> labels, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  Rng rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(c)) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    const auto take = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(members.size())));
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Tensor gather_embeddings(const Tensor& embeddings, std::span<const std::size_t> rows) {
  if (embeddings.rank() != 2) throw ShapeError("embeddings must be [R, E], got " + shape_string(embeddings.shape()));
  for (auto r : rows) {
    if (r >= embeddings.dim(0)) {
      throw ShapeError("embedding file has " + std::to_string(embeddings.dim(0)) + " rows; source row " +
                       std::to_string(r) + " requested");
    }
  }
  return embeddings.gather_rows(rows);
}

TrainingData model_inputs(const DatasetSplit& split, int model_id, const Tensor* embeddings) {
  TrainingData data{split.features, std::nullopt, split.labels};
  if (model_id == 2) {
    if (!embeddings) throw ConfigError("model 2 requires an external embeddings file");
    data.image = gather_embeddings(*embeddings, split.rows);
  } else if (model_id >= 3) {
    if (!split.images) throw ConfigError("model " + std::to_string(model_id) + " requires images in the dataset");
    data.image = *split.images;
  }
  data.validate();
  return data;
}

}  // namespace pricefusion
