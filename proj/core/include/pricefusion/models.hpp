#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pricefusion/layers.hpp"
#include "pricefusion/optim.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// Layer widths and convolution hyperparameters shared by the builders.
struct ArchConfig {
  std::size_t tabular_hidden1 = 300;
  std::size_t tabular_hidden2 = 120;
  std::size_t head_hidden = 120;
  std::size_t branch_dense = 128;
  std::size_t kernel = 3;
  std::size_t conv_stride = 1;
  std::size_t pool_window = 2;
  std::size_t pool_stride = 2;
  std::vector<std::size_t> image_filters{16, 32, 64};
  std::vector<std::size_t> tabular_filters{8, 16};

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// Everything needed to rebuild a model's layer structure.
struct ModelSpec {
  int model_id = 1;
  std::size_t tabular_width = 0;
  /// [H, W, C] for models 3-5.
  std::optional<Shape> image_shape;
  /// External embedding row width for model 2.
  std::size_t embedding_width = 0;
  ArchConfig arch;
};

/// Where Model 2 obtains its image representation.
struct EmbeddingProvider {
  enum class Source { InternalCNN, ExternalFile };
  Source source = Source::InternalCNN;
  std::filesystem::path path;
};

enum class Branch { Tabular, Image, Head };
std::string_view branch_name(Branch branch);

template <typename T>
struct Inference {
  BasicTensor<T> probs;
  BasicTensor<T> fused;
};

/**
 * Two-branch late-fusion network: tabular branch, optional image branch,
 * a concatenation node and a head that ends in a 4-way softmax.
 *
 * Unimodal graphs carry a single-input concatenation, which is the identity;
 * their fused activation is the last hidden tabular layer.
 */
template <typename T>
class ModelGraph {
 public:
  using ActivationSink = std::function<void(Branch, std::size_t, const nn::Layer<T>&, const BasicTensor<T>&)>;

  ModelGraph(ModelSpec spec, std::vector<nn::LayerPtr<T>> tabular, std::optional<std::vector<nn::LayerPtr<T>>> image,
             std::vector<nn::LayerPtr<T>> head);
  ModelGraph(const ModelGraph& other);
  ModelGraph& operator=(const ModelGraph& other);
  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;
  ~ModelGraph() = default;

  const ModelSpec& spec() const noexcept { return spec_; }
  bool has_image_branch() const noexcept { return image_.has_value(); }
  const std::vector<nn::LayerPtr<T>>& tabular_layers() const noexcept { return tabular_; }
  const std::vector<nn::LayerPtr<T>>& image_layers() const;
  const std::vector<nn::LayerPtr<T>>& head_layers() const noexcept { return head_; }
  const nn::Concat<T>& fusion() const noexcept { return fusion_; }

  /// Per-sample input shapes.
  Shape tabular_input_shape() const;
  std::optional<Shape> image_input_shape() const;
  std::size_t fused_width() const { return fusion_.output_width(); }

  /// Training forward pass: caches state for backward. Returns [N, 4] probabilities.
  BasicTensor<T> forward(const BasicTensor<T>& tabular, const BasicTensor<T>* image = nullptr);
  /// Backpropagates d(loss)/d(probs) through the whole graph.
  void backward(const BasicTensor<T>& grad_probs);
  /// Backpropagates d(loss)/d(logits), skipping the final softmax.
  void backward_from_logits(const BasicTensor<T>& grad_logits);
  /// Gradients with respect to the inputs of the last backward call.
  const BasicTensor<T>& tabular_input_grad() const noexcept { return tabular_input_grad_; }
  const BasicTensor<T>& image_input_grad() const noexcept { return image_input_grad_; }
  /// Fused activation of the last training forward pass.
  const BasicTensor<T>& fused() const noexcept { return fused_; }

  /// Stateless inference.
  Inference<T> infer(const BasicTensor<T>& tabular, const BasicTensor<T>* image = nullptr,
                     const ActivationSink& sink = {}) const;

  std::vector<nn::Parameter<T>> parameters();
  std::size_t parameter_count() const;
  std::size_t count_layers(nn::LayerKind kind) const;

  /// One line per layer: "<branch> <index> <description>".
  std::vector<std::string> describe() const;

  void clear_cache();

 private:
  void check_inputs(const BasicTensor<T>& tabular, const BasicTensor<T>* image) const;
  void backward_head(BasicTensor<T> grad, std::size_t head_end);

  ModelSpec spec_;
  std::vector<nn::LayerPtr<T>> tabular_;
  std::optional<std::vector<nn::LayerPtr<T>>> image_;
  nn::Concat<T> fusion_;
  std::vector<nn::LayerPtr<T>> head_;
  BasicTensor<T> fused_;
  BasicTensor<T> tabular_input_grad_;
  BasicTensor<T> image_input_grad_;
};

/// Side length of the square that holds `width` values after zero-padding.
std::size_t next_square_side(std::size_t width);

/// Per-stage output shapes of a Conv2D+ReLU+MaxPool2D stack, throwing a
/// ShapeError that names the failing stage when the input is too small.
std::vector<Shape> conv_stack_shapes(const Shape& input, const std::vector<std::size_t>& filters,
                                     const ArchConfig& arch, std::string_view what);

template <typename T>
ModelGraph<T> build_model_1(std::size_t tabular_width, const ArchConfig& arch = {}, std::uint64_t seed = 0);
template <typename T>
ModelGraph<T> build_model_2(std::size_t tabular_width, std::size_t embedding_width, const ArchConfig& arch = {},
                            std::uint64_t seed = 0);
template <typename T>
ModelGraph<T> build_model_3(std::size_t tabular_width, const Shape& image_shape, const ArchConfig& arch = {},
                            std::uint64_t seed = 0);
template <typename T>
ModelGraph<T> build_model_4(std::size_t tabular_width, const Shape& image_shape, const ArchConfig& arch = {},
                            std::uint64_t seed = 0);
template <typename T>
ModelGraph<T> build_model_5(std::size_t tabular_width, const Shape& image_shape, const ArchConfig& arch = {},
                            std::uint64_t seed = 0);

/// Dispatches on spec.model_id.
template <typename T>
ModelGraph<T> build_model(const ModelSpec& spec, std::uint64_t seed = 0);

/// Model 2 only accepts externally computed embeddings.
void require_external_embeddings(const EmbeddingProvider& provider);
/// Loads an [N, E] embedding matrix, checking the row count.
Tensor load_embeddings(const EmbeddingProvider& provider, std::size_t expected_rows);

extern template class ModelGraph<float>;
extern template class ModelGraph<double>;

}  // namespace pricefusion
