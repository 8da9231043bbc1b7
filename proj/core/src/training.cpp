#include "pricefusion/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pricefusion/keyvalue.hpp"
#include "pricefusion/tensor_io.hpp"

namespace pricefusion {

void TrainingData::validate() const {
  if (tabular.rank() < 1 || tabular.dim(0) != labels.size()) {
    throw ShapeError("tabular rows " + shape_string(tabular.shape()) + " do not match " +
                     std::to_string(labels.size()) + " labels");
  }
  if (image && (image->rank() < 1 || image->dim(0) != labels.size())) {
    throw ShapeError("image rows " + shape_string(image->shape()) + " do not match " +
                     std::to_string(labels.size()) + " labels");
  }
}

TrainingData TrainingData::subset(std::span<const std::size_t> rows) const {
  TrainingData out;
  out.tabular = tabular.gather_rows(rows);
  if (image) out.image = image->gather_rows(rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(labels.at(r));
  return out;
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

TrainedModel train(ModelGraph<float> model, const TrainingData& data, const TrainingConfig& cfg) {
  cfg.validate();
  data.validate();
  const std::size_t n = data.size();
  if (n == 0) throw TrainingError("cannot train on an empty dataset");
  if (model.has_image_branch() != data.image.has_value()) {
    throw ConfigError(model.has_image_branch() ? "model " + std::to_string(model.spec().model_id) +
                                                     " needs image or embedding inputs but the dataset has none"
                                               : "unimodal model given image inputs");
  }

  auto params = model.parameters();
  nn::apply_l1_scope<float>(params, cfg.l1_scope);
  auto state = nn::RmspropState<float>::zeros_like(params);
  Rng shuffle_rng(cfg.seed ^ 0x5eedf00dcafeULL);
  std::vector<std::size_t> order(n);
  std::vector<double> sample_loss(n);
  std::vector<int> batch_labels;
  std::vector<EpochStats> trace;
  trace.reserve(cfg.epochs);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Tensor tab = data.tabular.gather_rows(rows);
      std::optional<Tensor> img;
      if (data.image) img = data.image->gather_rows(rows);
      batch_labels.clear();
      for (auto r : rows) batch_labels.push_back(data.labels[r]);

      const Tensor probs = model.forward(tab, img ? &*img : nullptr);
      const double penalty = cfg.l1_alpha == 0.0 ? 0.0 : cfg.l1_alpha * nn::l1_norm<float>(params);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double p = probs[i * kNumClasses + static_cast<std::size_t>(batch_labels[i])];
        sample_loss[rows[i]] = -std::log(std::max(p, 1e-12)) + penalty;
      }
      const double batch_loss = nn::cross_entropy<float>(probs, batch_labels) + penalty;
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      const auto predicted = ops::argmax_last_axis(probs);
      for (std::size_t i = 0; i < rows.size(); ++i) correct += static_cast<int>(predicted[i]) == batch_labels[i];

      model.backward_from_logits(nn::cross_entropy_logit_grad<float>(probs, batch_labels));
      nn::add_l1_subgradient<float>(params, cfg.l1_alpha);
      nn::rmsprop_step<float>(params, state, cfg);
    }
    // Summed in sample order so the value does not depend on the shuffle.
    double total = 0.0;
    for (double l : sample_loss) total += l;
    trace.push_back({epoch, total / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)});
  }
  model.clear_cache();
  return TrainedModel{std::move(model), cfg, std::move(trace)};
}

namespace {

Inference<float> infer_all(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk) {
  data.validate();
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t n = data.size();
  Tensor probs({n, kNumClasses});
  Tensor fused({n, model.fused_width()});
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    const Tensor tab = data.tabular.slice_rows(start, end);
    std::optional<Tensor> img;
    if (data.image) img = data.image->slice_rows(start, end);
    const Inference<float> part = model.infer(tab, img ? &*img : nullptr);
    std::copy(part.probs.data().begin(), part.probs.data().end(),
              probs.data().begin() + static_cast<std::ptrdiff_t>(start * kNumClasses));
    std::copy(part.fused.data().begin(), part.fused.data().end(),
              fused.data().begin() + static_cast<std::ptrdiff_t>(start * model.fused_width()));
  }
  return {std::move(probs), std::move(fused)};
}

std::string param_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "param_%03zu.pft", index);
  return buf;
}

}  // namespace

Tensor predict_proba(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk) {
  return infer_all(model, data, chunk).probs;
}

std::vector<int> predict_classes(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk) {
  const auto idx = ops::argmax_last_axis(predict_proba(model, data, chunk));
  return {idx.begin(), idx.end()};
}

Tensor extract_fused(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk) {
  return infer_all(model, data, chunk).fused;
}

void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& trained) {
  std::filesystem::create_directories(dir);
  const ModelSpec& spec = trained.model.spec();
  KeyValueFile kv;
  kv.set("format", std::string("pricefusion-checkpoint/1"));
  kv.set("model_id", spec.model_id);
  kv.set("tabular_width", static_cast<std::uint64_t>(spec.tabular_width));
  kv.set("image_shape", spec.image_shape ? join_sizes(*spec.image_shape, 'x') : std::string("none"));
  kv.set("embedding_width", static_cast<std::uint64_t>(spec.embedding_width));
  const ArchConfig& a = spec.arch;
  kv.set("arch.tabular_hidden1", static_cast<std::uint64_t>(a.tabular_hidden1));
  kv.set("arch.tabular_hidden2", static_cast<std::uint64_t>(a.tabular_hidden2));
  kv.set("arch.head_hidden", static_cast<std::uint64_t>(a.head_hidden));
  kv.set("arch.branch_dense", static_cast<std::uint64_t>(a.branch_dense));
  kv.set("arch.kernel", static_cast<std::uint64_t>(a.kernel));
  kv.set("arch.conv_stride", static_cast<std::uint64_t>(a.conv_stride));
  kv.set("arch.pool_window", static_cast<std::uint64_t>(a.pool_window));
  kv.set("arch.pool_stride", static_cast<std::uint64_t>(a.pool_stride));
  kv.set("arch.image_filters", join_sizes(a.image_filters, ','));
  kv.set("arch.tabular_filters", join_sizes(a.tabular_filters, ','));
  const TrainingConfig& c = trained.config;
  kv.set("train.learning_rate", c.learning_rate);
  kv.set("train.batch_size", static_cast<std::uint64_t>(c.batch_size));
  kv.set("train.rmsprop_decay", c.rmsprop_decay);
  kv.set("train.rmsprop_epsilon", c.rmsprop_epsilon);
  kv.set("train.l1_alpha", c.l1_alpha);
  kv.set("train.l1_scope", std::string(l1_scope_name(c.l1_scope)));
  kv.set("train.epochs", static_cast<std::uint64_t>(c.epochs));
  kv.set("train.seed", c.seed);
  if (!trained.trace.empty()) {
    kv.set("train.final_loss", trained.trace.back().loss);
    kv.set("train.final_accuracy", trained.trace.back().accuracy);
  }
  const auto layers = trained.model.describe();
  for (std::size_t i = 0; i < layers.size(); ++i) kv.set("layer." + std::to_string(i), layers[i]);
  auto params = const_cast<ModelGraph<float>&>(trained.model).parameters();
  kv.set("param_count", static_cast<std::uint64_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string file = param_file_name(i);
    kv.set("param." + std::to_string(i), params[i].name + " " + shape_string(params[i].value->shape()) + " " + file);
    save_tensor(dir / file, *params[i].value);
  }
  kv.save(dir / "manifest.txt");
}

TrainedModel load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.txt";
  if (!std::filesystem::exists(manifest)) throw IoError("checkpoint not found: " + manifest.string());
  const KeyValueFile kv = KeyValueFile::load(manifest);
  if (kv.get("format") != "pricefusion-checkpoint/1") throw IoError(manifest.string() + ": unknown format");
  ModelSpec spec;
  spec.model_id = static_cast<int>(kv.get_uint("model_id"));
  spec.tabular_width = kv.get_uint("tabular_width");
  if (const std::string img = kv.get("image_shape"); img != "none") spec.image_shape = split_sizes(img, 'x');
  spec.embedding_width = kv.get_uint("embedding_width");
  ArchConfig& a = spec.arch;
  a.tabular_hidden1 = kv.get_uint("arch.tabular_hidden1");
  a.tabular_hidden2 = kv.get_uint("arch.tabular_hidden2");
  a.head_hidden = kv.get_uint("arch.head_hidden");
  a.branch_dense = kv.get_uint("arch.branch_dense");
  a.kernel = kv.get_uint("arch.kernel");
  a.conv_stride = kv.get_uint("arch.conv_stride");
  a.pool_window = kv.get_uint("arch.pool_window");
  a.pool_stride = kv.get_uint("arch.pool_stride");
  a.image_filters = split_sizes(kv.get("arch.image_filters"), ',');
  a.tabular_filters = split_sizes(kv.get("arch.tabular_filters"), ',');
  TrainingConfig c;
  c.learning_rate = kv.get_double("train.learning_rate");
  c.batch_size = kv.get_uint("train.batch_size");
  c.rmsprop_decay = kv.get_double("train.rmsprop_decay");
  c.rmsprop_epsilon = kv.get_double("train.rmsprop_epsilon");
  c.l1_alpha = kv.get_double("train.l1_alpha");
  c.l1_scope = parse_l1_scope(kv.get("train.l1_scope"));
  c.epochs = kv.get_uint("train.epochs");
  c.seed = kv.get_uint("train.seed");

  ModelGraph<float> model = build_model<float>(spec, c.seed);
  auto params = model.parameters();
  if (kv.get_uint("param_count") != params.size()) {
    throw IoError(manifest.string() + ": parameter count does not match model " + std::to_string(spec.model_id));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = load_tensor(dir / param_file_name(i));
    if (t.shape() != params[i].value->shape()) {
      throw IoError(manifest.string() + ": parameter " + std::to_string(i) + " has shape " + shape_string(t.shape()) +
                    ", expected " + shape_string(params[i].value->shape()));
    }
    *params[i].value = std::move(t);
  }
  return TrainedModel{std::move(model), c, {}};
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,loss,accuracy\n";
  for (const auto& e : trace) out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.accuracy) << '\n';
}

}  // namespace pricefusion
