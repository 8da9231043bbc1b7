#include "pricefusion/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pricefusion/images.hpp"
#include "pricefusion/metrics.hpp"
#include "pricefusion/rng.hpp"
#include "pricefusion/tabular.hpp"
#include "pricefusion/tensor_io.hpp"
#include "pricefusion/training.hpp"

namespace pricefusion {
namespace {

namespace fs = std::filesystem;

std::uint64_t to_uint(std::string_view key, std::string_view value) {
  try {
    return parse_uint(value);
  } catch (const std::invalid_argument&) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(value) + "'");
  }
}

double to_double(std::string_view key, std::string_view value) {
  try {
    return parse_double(value);
  } catch (const std::invalid_argument&) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
  }
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(value) + "'");
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view value) {
  try {
    return split_sizes(value, ',');
  } catch (const std::invalid_argument&) {
    throw ConfigError(std::string(key) + ": expected comma-separated integers, got '" + std::string(value) + "'");
  }
}

std::string float_text(float v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void require_path(const fs::path& path, std::string_view key) {
  if (path.empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
  if (!fs::exists(path)) throw IoError(std::string(key) + " not found: " + path.string());
}

void require_set(const fs::path& path, std::string_view key) {
  if (path.empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
}

std::optional<Tensor> load_model_embeddings(const ExperimentConfig& cfg, int model_id) {
  if (model_id != 2) return std::nullopt;
  EmbeddingProvider provider{EmbeddingProvider::Source::ExternalFile, cfg.embeddings};
  require_external_embeddings(provider);
  return load_tensor(cfg.embeddings);
}

std::string protocol_text(const KeyValueFile& manifest) {
  return manifest.find("protocol").value_or("unknown");
}

void set_split_manifest(KeyValueFile& kv, double ratio, std::uint64_t seed) {
  kv.set("split.method", std::string("stratified"));
  kv.set("split.train_ratio", ratio);
  kv.set("split.seed", seed);
  const double pct = ratio * 100.0;
  const std::string train_pct = format_double(std::round(pct * 1e6) / 1e6);
  const std::string test_pct = format_double(std::round((100.0 - pct) * 1e6) / 1e6);
  kv.set("protocol", "stratified " + train_pct + "/" + test_pct + " train/test hold-out split, seed " +
                         std::to_string(seed));
}

DatasetSplit take_rows(const Tensor& features, const std::optional<Tensor>& images, const std::vector<int>& labels,
                       const std::vector<std::size_t>& source_rows, const std::vector<std::size_t>& pick) {
  DatasetSplit s;
  s.features = features.gather_rows(pick);
  if (images) s.images = images->gather_rows(pick);
  for (auto i : pick) {
    s.labels.push_back(labels[i]);
    s.rows.push_back(source_rows[i]);
  }
  return s;
}

Tensor stack_images(const std::vector<Tensor>& images, std::size_t side) {
  Tensor out(Shape{images.size(), side, side, 3});
  const std::size_t per = side * side * 3;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::copy(images[i].data().begin(), images[i].data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

Tensor fit_image(Tensor image, std::size_t side) {
  if (image.dim(2) != 3) throw ShapeError("images must have 3 channels, got " + shape_string(image.shape()));
  if (image.dim(0) != side || image.dim(1) != side) image = resize_bilinear(image, side, side);
  return image;
}

}  // namespace

SynthMode parse_synth_mode(std::string_view text) {
  if (text == "unimodal") return SynthMode::Unimodal;
  if (text == "multimodal") return SynthMode::Multimodal;
  throw ConfigError("synth mode must be 'unimodal' or 'multimodal', got '" + std::string(text) + "'");
}

std::string_view synth_mode_name(SynthMode mode) { return mode == SynthMode::Unimodal ? "unimodal" : "multimodal"; }

// ---------------------------------------------------------------- config

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k = {
      "model", "learning_rate", "batch_size", "rmsprop_decay", "rmsprop_epsilon", "l1_alpha", "l1_scope", "epochs",
      "seed", "arch.tabular_hidden1", "arch.tabular_hidden2", "arch.head_hidden", "arch.branch_dense", "arch.kernel",
      "arch.conv_stride", "arch.pool_window", "arch.pool_stride", "arch.image_filters", "arch.tabular_filters",
      "split_ratio", "split_seed", "classifiers", "knn_k", "tree_max_depth", "tree_min_leaf", "shallow_epochs",
      "shallow_learning_rate", "shallow_l2", "image_size", "csv", "image_dir", "image_stack", "embeddings", "dataset",
      "checkpoint", "out", "synth_mode", "synth_n", "dump_activations"};
  return k;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const std::string k(key);
  if (k == "model") {
    const auto m = to_uint(key, value);
    if (m < 1 || m > 5) throw ConfigError("model must be 1-5, got " + std::string(value));
    model_id = static_cast<int>(m);
  } else if (k == "learning_rate") {
    training.learning_rate = to_double(key, value);
  } else if (k == "batch_size") {
    training.batch_size = to_uint(key, value);
  } else if (k == "rmsprop_decay") {
    training.rmsprop_decay = to_double(key, value);
  } else if (k == "rmsprop_epsilon") {
    training.rmsprop_epsilon = to_double(key, value);
  } else if (k == "l1_alpha") {
    training.l1_alpha = to_double(key, value);
  } else if (k == "l1_scope") {
    training.l1_scope = parse_l1_scope(value);
  } else if (k == "epochs") {
    training.epochs = to_uint(key, value);
  } else if (k == "seed") {
    training.seed = to_uint(key, value);
  } else if (k == "arch.tabular_hidden1") {
    arch.tabular_hidden1 = to_uint(key, value);
  } else if (k == "arch.tabular_hidden2") {
    arch.tabular_hidden2 = to_uint(key, value);
  } else if (k == "arch.head_hidden") {
    arch.head_hidden = to_uint(key, value);
  } else if (k == "arch.branch_dense") {
    arch.branch_dense = to_uint(key, value);
  } else if (k == "arch.kernel") {
    arch.kernel = to_uint(key, value);
  } else if (k == "arch.conv_stride") {
    arch.conv_stride = to_uint(key, value);
  } else if (k == "arch.pool_window") {
    arch.pool_window = to_uint(key, value);
  } else if (k == "arch.pool_stride") {
    arch.pool_stride = to_uint(key, value);
  } else if (k == "arch.image_filters") {
    arch.image_filters = to_sizes(key, value);
  } else if (k == "arch.tabular_filters") {
    arch.tabular_filters = to_sizes(key, value);
  } else if (k == "split_ratio") {
    split_ratio = to_double(key, value);
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  } else if (k == "split_seed") {
    split_seed = to_uint(key, value);
  } else if (k == "classifiers") {
    classifiers.clear();
    report_unimplemented = false;
    std::string_view rest = value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      if (item == "all") {
        for (auto kind : implemented_classifiers()) classifiers.push_back(kind);
        report_unimplemented = true;
      } else if (!item.empty()) {
        classifiers.push_back(parse_classifier_kind(item));
      }
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (classifiers.empty()) throw ConfigError("classifiers: empty list");
  } else if (k == "knn_k") {
    classifier_params.k = to_uint(key, value);
  } else if (k == "tree_max_depth") {
    classifier_params.max_depth = to_uint(key, value);
  } else if (k == "tree_min_leaf") {
    classifier_params.min_leaf = to_uint(key, value);
  } else if (k == "shallow_epochs") {
    classifier_params.epochs = to_uint(key, value);
  } else if (k == "shallow_learning_rate") {
    classifier_params.learning_rate = to_double(key, value);
  } else if (k == "shallow_l2") {
    classifier_params.l2 = to_double(key, value);
  } else if (k == "image_size") {
    image_size = to_uint(key, value);
    if (image_size == 0) throw ConfigError("image_size must be positive");
  } else if (k == "csv") {
    csv = std::string(value);
  } else if (k == "image_dir") {
    image_dir = std::string(value);
  } else if (k == "image_stack") {
    image_stack = std::string(value);
  } else if (k == "embeddings") {
    embeddings = std::string(value);
  } else if (k == "dataset") {
    dataset = std::string(value);
  } else if (k == "checkpoint") {
    checkpoint = std::string(value);
  } else if (k == "out") {
    out = std::string(value);
  } else if (k == "synth_mode") {
    synth_mode = parse_synth_mode(value);
  } else if (k == "synth_n") {
    synth_n = to_uint(key, value);
  } else if (k == "dump_activations") {
    dump_activations = to_bool(key, value);
  } else {
    throw ConfigError("unknown setting '" + k + "'");
  }
}

void ExperimentConfig::load_file(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  const KeyValueFile file = KeyValueFile::load(path);
  for (const auto& [k, v] : file.entries()) {
    if (!k.empty()) set(k, v);
  }
}

KeyValueFile ExperimentConfig::to_keyvalue() const {
  KeyValueFile kv;
  kv.set("model", model_id);
  kv.set("learning_rate", training.learning_rate);
  kv.set("batch_size", static_cast<std::uint64_t>(training.batch_size));
  kv.set("rmsprop_decay", training.rmsprop_decay);
  kv.set("rmsprop_epsilon", training.rmsprop_epsilon);
  kv.set("l1_alpha", training.l1_alpha);
  kv.set("l1_scope", std::string(l1_scope_name(training.l1_scope)));
  kv.set("epochs", static_cast<std::uint64_t>(training.epochs));
  kv.set("seed", training.seed);
  kv.set("arch.tabular_hidden1", static_cast<std::uint64_t>(arch.tabular_hidden1));
  kv.set("arch.tabular_hidden2", static_cast<std::uint64_t>(arch.tabular_hidden2));
  kv.set("arch.head_hidden", static_cast<std::uint64_t>(arch.head_hidden));
  kv.set("arch.branch_dense", static_cast<std::uint64_t>(arch.branch_dense));
  kv.set("arch.kernel", static_cast<std::uint64_t>(arch.kernel));
  kv.set("arch.conv_stride", static_cast<std::uint64_t>(arch.conv_stride));
  kv.set("arch.pool_window", static_cast<std::uint64_t>(arch.pool_window));
  kv.set("arch.pool_stride", static_cast<std::uint64_t>(arch.pool_stride));
  kv.set("arch.image_filters", join_sizes(arch.image_filters, ','));
  kv.set("arch.tabular_filters", join_sizes(arch.tabular_filters, ','));
  kv.set("split_ratio", split_ratio);
  kv.set("split_seed", split_seed);
  std::string kinds;
  for (auto kind : classifiers) kinds += (kinds.empty() ? "" : ",") + std::string(classifier_id(kind));
  if (report_unimplemented) kinds = "all";
  kv.set("classifiers", kinds);
  kv.set("knn_k", static_cast<std::uint64_t>(classifier_params.k));
  kv.set("tree_max_depth", static_cast<std::uint64_t>(classifier_params.max_depth));
  kv.set("tree_min_leaf", static_cast<std::uint64_t>(classifier_params.min_leaf));
  kv.set("shallow_epochs", static_cast<std::uint64_t>(classifier_params.epochs));
  kv.set("shallow_learning_rate", classifier_params.learning_rate);
  kv.set("shallow_l2", classifier_params.l2);
  kv.set("image_size", static_cast<std::uint64_t>(image_size));
  kv.set("csv", csv.string());
  kv.set("image_dir", image_dir.string());
  kv.set("image_stack", image_stack.string());
  kv.set("embeddings", embeddings.string());
  kv.set("dataset", dataset.string());
  kv.set("checkpoint", checkpoint.string());
  kv.set("out", out.string());
  kv.set("synth_mode", std::string(synth_mode_name(synth_mode)));
  kv.set("synth_n", static_cast<std::uint64_t>(synth_n));
  kv.set("dump_activations", std::string(dump_activations ? "true" : "false"));
  return kv;
}

// ---------------------------------------------------------------- synth

int multimodal_label(int tabular_code, int quadrant) {
  return quadrant == 3 ? (tabular_code + 1) % static_cast<int>(kNumClasses) : tabular_code;
}

SynthData generate_synth(SynthMode mode, std::size_t n, std::uint64_t seed) {
  if (n < 40) throw ConfigError("synth needs n >= 40, got " + std::to_string(n));
  Rng rng(seed);
  SynthData out;
  out.features = Tensor(Shape{n, kSynthFeatures});
  if (mode == SynthMode::Unimodal) {
    // Class c is centred on 3 * e_c with per-coordinate noise N(0, 0.5^2)
    // truncated to +-1.4, so classes are separated by a margin of about 0.14.
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % kNumClasses);
    rng.shuffle(std::span<int>(labels));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < kSynthFeatures; ++j) {
        double z = 0.0;
        do {
          z = rng.normal(0.0, 0.5);
        } while (std::abs(z) > 1.4);
        out.features[i * kSynthFeatures + j] = static_cast<float>(z + (static_cast<int>(j) == labels[i] ? 3.0 : 0.0));
      }
    }
    out.labels = std::move(labels);
    return out;
  }

  constexpr std::size_t side = kSynthImageSide, half = side / 2, blob = side / 4, cell = side / 4;
  std::vector<int> combos(n);
  for (std::size_t i = 0; i < n; ++i) combos[i] = static_cast<int>(i % 16);
  rng.shuffle(std::span<int>(combos));
  Tensor images(Shape{n, side, side, 3});
  Tensor emb(Shape{n, 4 * 4 * 3});
  for (std::size_t i = 0; i < n; ++i) {
    const int t = combos[i] % 4, q = combos[i] / 4;
    out.tabular_code.push_back(t);
    out.quadrant.push_back(q);
    out.labels.push_back(multimodal_label(t, q));
    out.features[i * kSynthFeatures] = static_cast<float>(t) / 3.0f;
    for (std::size_t j = 1; j < kSynthFeatures; ++j) out.features[i * kSynthFeatures + j] = static_cast<float>(rng.uniform());
    float* img = images.data().data() + i * side * side * 3;
    for (std::size_t p = 0; p < side * side * 3; ++p) img[p] = static_cast<float>(rng.uniform(0.0, 0.1));
    const std::size_t oy = static_cast<std::size_t>(q / 2) * half + rng.uniform_index(half - blob + 1);
    const std::size_t ox = static_cast<std::size_t>(q % 2) * half + rng.uniform_index(half - blob + 1);
    for (std::size_t y = oy; y < oy + blob; ++y)
      for (std::size_t x = ox; x < ox + blob; ++x)
        for (std::size_t c = 0; c < 3; ++c) img[(y * side + x) * 3 + c] = static_cast<float>(rng.uniform(0.8, 1.0));
    // Stand-in for pretrained image features: 4x4 average pooling per channel.
    for (std::size_t gy = 0; gy < 4; ++gy)
      for (std::size_t gx = 0; gx < 4; ++gx)
        for (std::size_t c = 0; c < 3; ++c) {
          double s = 0.0;
          for (std::size_t y = gy * cell; y < (gy + 1) * cell; ++y)
            for (std::size_t x = gx * cell; x < (gx + 1) * cell; ++x) s += img[(y * side + x) * 3 + c];
          emb[i * 48 + (gy * 4 + gx) * 3 + c] = static_cast<float>(s / static_cast<double>(cell * cell));
        }
  }
  out.images = std::move(images);
  out.embeddings = std::move(emb);
  return out;
}

Dataset synth_dataset(const SynthData& source, double split_ratio, std::uint64_t split_seed) {
  const auto split = stratified_split(source.labels, split_ratio, split_seed);
  std::vector<std::size_t> rows(source.labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Dataset d;
  d.train = take_rows(source.features, source.images, source.labels, rows, split.train);
  d.test = take_rows(source.features, source.images, source.labels, rows, split.test);
  return d;
}

// ---------------------------------------------------------------- commands

std::string cmd_synth(const ExperimentConfig& cfg) {
  require_set(cfg.out, "out");
  const SynthData data = generate_synth(cfg.synth_mode, cfg.synth_n, cfg.training.seed);
  Dataset d = synth_dataset(data, cfg.split_ratio, cfg.split_seed);
  d.manifest.set("format", std::string("pricefusion-dataset/1"));
  d.manifest.set("source", "synth:" + std::string(synth_mode_name(cfg.synth_mode)));
  d.manifest.set("synth.seed", cfg.training.seed);
  d.manifest.set("synth.n", static_cast<std::uint64_t>(cfg.synth_n));
  set_split_manifest(d.manifest, cfg.split_ratio, cfg.split_seed);
  if (data.embeddings) {
    d.manifest.set("embeddings", std::string("embeddings.pft"));
    d.manifest.set("embedding_width", static_cast<std::uint64_t>(data.embeddings->dim(1)));
  }
  d.save(cfg.out);
  if (data.embeddings) save_tensor(cfg.out / "embeddings.pft", *data.embeddings);
  return "synth " + std::string(synth_mode_name(cfg.synth_mode)) + ": " + std::to_string(d.train.size()) +
         " train / " + std::to_string(d.test.size()) + " test rows written to " + cfg.out.string();
}

std::string cmd_preprocess(const ExperimentConfig& cfg) {
  require_path(cfg.csv, "csv");
  require_set(cfg.out, "out");
  if (!cfg.image_dir.empty()) require_path(cfg.image_dir, "image_dir");
  if (!cfg.image_stack.empty()) require_path(cfg.image_stack, "image_stack");
  if (!cfg.image_dir.empty() && !cfg.image_stack.empty()) {
    throw ConfigError("image_dir and image_stack are mutually exclusive");
  }

  const CsvLoad load = load_records(cfg.csv);
  std::vector<std::string> log = load.rejected;
  std::optional<Tensor> stack;
  if (!cfg.image_stack.empty()) {
    stack = load_tensor(cfg.image_stack);
    if (stack->rank() != 4 || stack->dim(3) != 3) {
      throw ShapeError("image_stack must be [R, H, W, 3], got " + shape_string(stack->shape()));
    }
  }
  const auto decoder = default_image_decoder();
  const bool with_images = stack.has_value() || !cfg.image_dir.empty();

  std::vector<RawRecord> kept;
  std::vector<Tensor> images;
  std::vector<int> labels;
  for (const auto& rec : load.records) {
    const std::string where = "row " + std::to_string(rec.source_row) + ": dropped: ";
    int label = 0;
    try {
      label = parse_record(rec).label;
    } catch (const RecordError& e) {
      log.push_back(where + e.what());
      continue;
    }
    if (!cfg.image_dir.empty()) {
      if (rec.image_path.empty()) {
        log.push_back(where + "image_path: empty");
        continue;
      }
      std::string reason;
      auto img = decoder->decode(cfg.image_dir / rec.image_path, reason);
      if (!img) {
        log.push_back(where + "image_path: " + reason);
        continue;
      }
      images.push_back(fit_image(std::move(*img), cfg.image_size));
    } else if (stack) {
      if (rec.source_row >= stack->dim(0)) {
        log.push_back(where + "image_path: no row in image stack");
        continue;
      }
      const Tensor one = stack->slice_rows(rec.source_row, rec.source_row + 1);
      images.push_back(fit_image(one.reshape(Shape(one.shape().begin() + 1, one.shape().end())), cfg.image_size));
    }
    kept.push_back(rec);
    labels.push_back(label);
  }
  if (kept.size() < 2) throw DataError(cfg.csv.string() + ": fewer than two usable records");

  const auto split = stratified_split(labels, cfg.split_ratio, cfg.split_seed);
  if (split.train.empty()) throw DataError("training split is empty");
  std::vector<RawRecord> train_records;
  for (auto i : split.train) train_records.push_back(kept[i]);
  const EncoderSpec encoder = fit_encoder(train_records);

  auto build = [&](const std::vector<std::size_t>& pick) {
    DatasetSplit s;
    std::vector<float> values;
    std::vector<Tensor> imgs;
    for (auto i : pick) {
      try {
        const FeatureVector fv = encode(kept[i], encoder);
        values.insert(values.end(), fv.values.data().begin(), fv.values.data().end());
        s.labels.push_back(fv.label);
        s.rows.push_back(kept[i].source_row);
        if (with_images) imgs.push_back(images[i]);
      } catch (const RecordError& e) {
        log.push_back("row " + std::to_string(kept[i].source_row) + ": dropped: " + e.what());
      }
    }
    s.features = Tensor(Shape{s.labels.size(), encoder.width()}, std::move(values));
    if (with_images) s.images = stack_images(imgs, cfg.image_size);
    return s;
  };

  Dataset d;
  d.train = build(split.train);
  d.test = build(split.test);
  auto& m = d.manifest;
  m.set("format", std::string("pricefusion-dataset/1"));
  m.set("source", "csv:" + cfg.csv.filename().string());
  m.set("records.read", static_cast<std::uint64_t>(load.records.size() + load.rejected.size()));
  m.set("records.kept", static_cast<std::uint64_t>(d.train.size() + d.test.size()));
  m.set("records.dropped", static_cast<std::uint64_t>(log.size()));
  set_split_manifest(m, cfg.split_ratio, cfg.split_seed);
  m.set("features.excluded", std::string("model,hit,hit_count"));
  if (with_images) m.set("image.source", stack ? std::string("stack") : "decoder:" + decoder->name());
  encoder.store(m);
  const auto names = encoder.feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) m.set("feature." + std::to_string(i), names[i]);
  d.save(cfg.out);

  std::ofstream out(cfg.out / "preprocess.log", std::ios::binary);
  for (const auto& line : log) out << line << '\n';
  out << "kept " << d.train.size() + d.test.size() << " of " << load.records.size() + load.rejected.size()
      << " records\n";
  if (!out) throw IoError("cannot write " + (cfg.out / "preprocess.log").string());
  return "preprocess: kept " + std::to_string(d.train.size() + d.test.size()) + " records (" +
         std::to_string(log.size()) + " dropped), feature width " + std::to_string(encoder.width());
}

std::string cmd_train(const ExperimentConfig& cfg) {
  require_path(cfg.dataset, "dataset");
  require_set(cfg.out, "out");
  cfg.training.validate();
  if (cfg.model_id == 2) {
    require_external_embeddings({EmbeddingProvider::Source::ExternalFile, cfg.embeddings});
  }
  const Dataset ds = Dataset::load(cfg.dataset);
  const auto emb = load_model_embeddings(cfg, cfg.model_id);
  const TrainingData train_data = model_inputs(ds.train, cfg.model_id, emb ? &*emb : nullptr);

  ModelSpec spec;
  spec.model_id = cfg.model_id;
  spec.tabular_width = ds.feature_width();
  spec.arch = cfg.arch;
  if (cfg.model_id == 2) spec.embedding_width = train_data.image->dim(1);
  if (cfg.model_id >= 3) spec.image_shape = ds.image_shape();
  ModelGraph<float> model = build_model<float>(spec, cfg.training.seed);

  const TrainedModel trained = train(std::move(model), train_data, cfg.training);
  save_checkpoint(cfg.out, trained);
  write_loss_trace(cfg.out / "loss_trace.csv", trained.trace);

  std::string summary = "train: model " + std::to_string(cfg.model_id) + ", " + std::to_string(trained.trace.size()) +
                        " epochs";
  if (!trained.trace.empty()) {
    summary += ", final loss " + format_double(trained.trace.back().loss) + ", train accuracy " +
               format_double(trained.trace.back().accuracy);
  }
  return summary;
}

std::string cmd_evaluate(const ExperimentConfig& cfg) {
  require_path(cfg.checkpoint, "checkpoint");
  require_path(cfg.dataset, "dataset");
  require_set(cfg.out, "out");
  for (auto kind : cfg.classifiers) {
    if (kind == ClassifierKind::GradientBoosting) {
      throw NotImplementedError("classifier 'Gradient Boosting' is not implemented");
    }
  }
  const TrainedModel trained = load_checkpoint(cfg.checkpoint);
  const int model_id = trained.model.spec().model_id;
  const Dataset ds = Dataset::load(cfg.dataset);
  const auto emb = load_model_embeddings(cfg, model_id);
  const TrainingData train_data = model_inputs(ds.train, model_id, emb ? &*emb : nullptr);
  const TrainingData test_data = model_inputs(ds.test, model_id, emb ? &*emb : nullptr);
  if (test_data.size() == 0) throw DataError("test split is empty");

  std::optional<Tensor> train_x, test_x;
  ReportDocument doc;
  doc.title = "Model " + std::to_string(model_id) + " classifier comparison";
  doc.protocol = protocol_text(ds.manifest) +
                 "; shallow classifiers are fit on train-split fused embeddings standardized per column; "
                 "Fully Connected is the trained network head";
  doc.config = {{"model", std::to_string(model_id)},
                {"dataset", cfg.dataset.filename().string()},
                {"train_rows", std::to_string(ds.train.size())},
                {"test_rows", std::to_string(ds.test.size())},
                {"fused_width", std::to_string(trained.model.fused_width())},
                {"learning_rate", format_double(trained.config.learning_rate)},
                {"batch_size", std::to_string(trained.config.batch_size)},
                {"epochs", std::to_string(trained.config.epochs)},
                {"l1_alpha", format_double(trained.config.l1_alpha)},
                {"l1_scope", std::string(l1_scope_name(trained.config.l1_scope))},
                {"seed", std::to_string(trained.config.seed)},
                {"knn_k", std::to_string(cfg.classifier_params.k)},
                {"tree_max_depth", std::to_string(cfg.classifier_params.max_depth)},
                {"tree_min_leaf", std::to_string(cfg.classifier_params.min_leaf)},
                {"shallow_epochs", std::to_string(cfg.classifier_params.epochs)},
                {"shallow_learning_rate", format_double(cfg.classifier_params.learning_rate)},
                {"shallow_l2", format_double(cfg.classifier_params.l2)}};

  fs::create_directories(cfg.out);
  for (auto kind : cfg.classifiers) {
    std::vector<int> predicted;
    if (kind == ClassifierKind::FullyConnected) {
      predicted = predict_classes(trained.model, test_data);
    } else {
      if (!train_x) {
        const Tensor fused_train = extract_fused(trained.model, train_data);
        const Standardizer st = Standardizer::fit(fused_train);
        train_x = st.transform(fused_train);
        test_x = st.transform(extract_fused(trained.model, test_data));
      }
      auto clf = make_classifier(kind, cfg.classifier_params);
      clf->fit(*train_x, train_data.labels);
      predicted = clf->predict(*test_x);
      clf->save(cfg.out / "classifiers" / std::string(classifier_id(kind)));
    }
    ReportRow row;
    row.classifier = std::string(classifier_name(kind));
    row.report = compute_metrics(ConfusionMatrix::from_predictions(test_data.labels, predicted));
    doc.rows.push_back(std::move(row));
  }
  if (cfg.report_unimplemented) {
    doc.rows.push_back({std::string(classifier_name(ClassifierKind::GradientBoosting)), std::nullopt, "not implemented"});
  }

  const auto write = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw IoError("cannot write " + p.string());
  };
  write(cfg.out / "report.json", report_json(doc));
  write(cfg.out / "report.txt", report_text(doc));

  std::string summary = "evaluate:";
  for (const auto& row : doc.rows) {
    summary += " " + row.classifier + "=" + (row.report ? format_double(row.report->accuracy) : row.status) + ";";
  }
  summary.pop_back();
  return summary;
}

std::string cmd_embed(const ExperimentConfig& cfg) {
  require_path(cfg.checkpoint, "checkpoint");
  require_path(cfg.dataset, "dataset");
  require_set(cfg.out, "out");
  const TrainedModel trained = load_checkpoint(cfg.checkpoint);
  const int model_id = trained.model.spec().model_id;
  const Dataset ds = Dataset::load(cfg.dataset);
  const auto emb = load_model_embeddings(cfg, model_id);
  fs::create_directories(cfg.out);
  std::size_t rows = 0;
  for (const auto* split : {&ds.train, &ds.test}) {
    const std::string name = split == &ds.train ? "train" : "test";
    const TrainingData data = model_inputs(*split, model_id, emb ? &*emb : nullptr);
    save_tensor(cfg.out / (name + "_embeddings.pft"), extract_fused(trained.model, data));
    write_rows(cfg.out / (name + "_rows.txt"), split->rows);
    rows += data.size();
  }
  if (cfg.dump_activations) {
    const DatasetSplit& src = ds.test.size() ? ds.test : ds.train;
    const TrainingData data = model_inputs(src, model_id, emb ? &*emb : nullptr);
    const Tensor tab = data.tabular.slice_rows(0, 1);
    std::optional<Tensor> img;
    if (data.image) img = data.image->slice_rows(0, 1);
    const fs::path dir = cfg.out / "activations";
    fs::create_directories(dir);
    std::ofstream index(dir / "index.txt", std::ios::binary);
    trained.model.infer(tab, img ? &*img : nullptr,
                        [&](Branch branch, std::size_t i, const nn::Layer<float>& layer, const Tensor& activation) {
                          const std::string file = std::string(branch_name(branch)) + "_" + std::to_string(i) + ".pft";
                          save_tensor(dir / file, activation);
                          index << file << ' ' << layer.describe() << ' ' << shape_string(activation.shape()) << '\n';
                        });
  }
  return "embed: wrote " + std::to_string(rows) + " fused embeddings of width " +
         std::to_string(trained.model.fused_width()) + " to " + cfg.out.string();
}

std::string cmd_visualize(const ExperimentConfig& cfg) {
  require_path(cfg.checkpoint, "checkpoint");
  require_path(cfg.dataset, "dataset");
  require_set(cfg.out, "out");
  const TrainedModel trained = load_checkpoint(cfg.checkpoint);
  const int model_id = trained.model.spec().model_id;
  const Dataset ds = Dataset::load(cfg.dataset);
  const auto emb = load_model_embeddings(cfg, model_id);
  const TrainingData train_data = model_inputs(ds.train, model_id, emb ? &*emb : nullptr);
  const TrainingData test_data = model_inputs(ds.test, model_id, emb ? &*emb : nullptr);
  const Tensor a = extract_fused(trained.model, train_data);
  const Tensor b = extract_fused(trained.model, test_data);
  std::vector<float> all(a.data().begin(), a.data().end());
  all.insert(all.end(), b.data().begin(), b.data().end());
  const std::size_t n = train_data.size() + test_data.size();
  const Tensor fused(Shape{n, trained.model.fused_width()}, std::move(all));
  std::vector<int> labels = train_data.labels;
  labels.insert(labels.end(), test_data.labels.begin(), test_data.labels.end());

  const PcaResult pca = pca_project(fused, 2, cfg.training.seed);
  if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) throw IoError("cannot write " + cfg.out.string());
  out << "# explained_variance=" << format_double(pca.explained_ratio[0]) << ","
      << format_double(pca.explained_ratio[1]) << "\n";
  out << "x,y,true_class\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << float_text(pca.projection[i * 2]) << ',' << float_text(pca.projection[i * 2 + 1]) << ',' << labels[i]
        << '\n';
  }
  if (!out) throw IoError("cannot write " + cfg.out.string());
  return "visualize: " + std::to_string(n) + " points, explained variance " + format_double(pca.explained_ratio[0]) +
         " + " + format_double(pca.explained_ratio[1]);
}

}  // namespace pricefusion
