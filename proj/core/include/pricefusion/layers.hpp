#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pricefusion/ops.hpp"
#include "pricefusion/rng.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion::nn {

enum class LayerKind { Dense, Conv2D, MaxPool2D, Flatten, ReLU, Softmax, Concat, Reshape };

std::string_view layer_kind_name(LayerKind kind);

/// Raised when backward is requested without a cached forward pass.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A trainable tensor and its gradient. `regularized` marks weights that
/// receive the L1 penalty (biases do not).
template <typename T>
struct Parameter {
  std::string name;
  BasicTensor<T>* value = nullptr;
  BasicTensor<T>* grad = nullptr;
  bool regularized = false;
};

/**
 * A single-input layer operating on batches.
 *
 * Inputs carry a leading batch axis: a layer declared for per-sample shape
 * S accepts [N, S...]. `forward` caches whatever `backward` needs; `backward`
 * writes parameter gradients (overwriting, not accumulating) and returns the
 * gradient with respect to the input.
 */
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  const Shape& input_shape() const noexcept { return input_shape_; }
  virtual Shape output_shape() const = 0;

  /// Stateless evaluation; safe to call concurrently.
  virtual BasicTensor<T> apply(const BasicTensor<T>& input) const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& input) = 0;
  virtual BasicTensor<T> backward(const BasicTensor<T>& upstream) = 0;

  virtual std::vector<Parameter<T>> parameters() { return {}; }
  /// Drops cached forward state.
  virtual void clear_cache() {}

 protected:
  explicit Layer(Shape input_shape) : input_shape_(std::move(input_shape)) {}
  Layer(const Layer&) = default;
  Layer& operator=(const Layer&) = default;

  /// Validates [N, input_shape...] and returns N.
  std::size_t check_batch(const BasicTensor<T>& input) const;
  Shape batched(std::size_t n, const Shape& per_sample) const;

 private:
  Shape input_shape_;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

/// y = x W + b with W [in, out], b [out].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out, Rng& rng);
  Dense(BasicTensor<T> weight, BasicTensor<T> bias);

  LayerKind kind() const override { return LayerKind::Dense; }
  std::string describe() const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  Shape output_shape() const override { return {weight_.dim(1)}; }

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  std::vector<Parameter<T>> parameters() override;
  void clear_cache() override { input_.reset(); }

  const BasicTensor<T>& weight() const noexcept { return weight_; }
  const BasicTensor<T>& bias() const noexcept { return bias_; }

 private:
  BasicTensor<T> weight_, bias_, weight_grad_, bias_grad_;
  std::optional<BasicTensor<T>> input_;
};

/// Valid cross-correlation with kernels [K, K, C, F] plus per-filter bias.
template <typename T>
class Conv2D final : public Layer<T> {
 public:
  /// input_shape is [H, W, C].
  Conv2D(Shape input_shape, std::size_t kernel, std::size_t filters, std::size_t stride, Rng& rng);

  LayerKind kind() const override { return LayerKind::Conv2D; }
  std::string describe() const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2D>(*this); }
  Shape output_shape() const override;

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  std::vector<Parameter<T>> parameters() override;
  void clear_cache() override { cols_.reset(); }

  const BasicTensor<T>& kernels() const noexcept { return kernels_; }

 private:
  std::size_t kernel_, filters_, stride_;
  BasicTensor<T> kernels_, bias_, kernels_grad_, bias_grad_;
  std::optional<BasicTensor<T>> cols_;
  std::size_t cached_batch_ = 0;
};

template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  MaxPool2D(Shape input_shape, std::size_t window, std::size_t stride);

  LayerKind kind() const override { return LayerKind::MaxPool2D; }
  std::string describe() const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2D>(*this); }
  Shape output_shape() const override;

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  void clear_cache() override { argmax_.reset(); }

 private:
  std::size_t window_, stride_;
  std::optional<std::vector<std::size_t>> argmax_;
  std::size_t cached_batch_ = 0;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(Shape input_shape) : Layer<T>(std::move(input_shape)) {}

  LayerKind kind() const override { return LayerKind::Flatten; }
  std::string describe() const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
  Shape output_shape() const override { return {shape_size(this->input_shape())}; }

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  void clear_cache() override { cached_batch_.reset(); }

 private:
  std::optional<std::size_t> cached_batch_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  explicit ReLU(Shape input_shape) : Layer<T>(std::move(input_shape)) {}

  LayerKind kind() const override { return LayerKind::ReLU; }
  std::string describe() const override { return "ReLU"; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
  Shape output_shape() const override { return this->input_shape(); }

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  void clear_cache() override { active_.reset(); }

 private:
  std::optional<std::vector<std::uint8_t>> active_;
  std::size_t cached_batch_ = 0;
};

/// Row-wise softmax over a rank-1 per-sample input.
template <typename T>
class Softmax final : public Layer<T> {
 public:
  explicit Softmax(std::size_t width) : Layer<T>({width}) {}

  LayerKind kind() const override { return LayerKind::Softmax; }
  std::string describe() const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Softmax>(*this); }
  Shape output_shape() const override { return this->input_shape(); }

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  void clear_cache() override { output_.reset(); }

 private:
  std::optional<BasicTensor<T>> output_;
};

/// Zero-pads a rank-1 input to the product of `output_shape` and reshapes.
template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(std::size_t input_width, Shape output_shape);

  LayerKind kind() const override { return LayerKind::Reshape; }
  std::string describe() const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }
  Shape output_shape() const override { return output_shape_; }

  BasicTensor<T> apply(const BasicTensor<T>& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  void clear_cache() override { cached_batch_.reset(); }

 private:
  Shape output_shape_;
  std::optional<std::size_t> cached_batch_;
};

/// Column-wise concatenation of rank-1 per-sample inputs: the fusion point.
template <typename T>
class Concat {
 public:
  explicit Concat(std::vector<std::size_t> widths) : widths_(std::move(widths)) {}

  LayerKind kind() const { return LayerKind::Concat; }
  std::string describe() const;
  std::size_t output_width() const;
  std::span<const std::size_t> widths() const { return widths_; }

  BasicTensor<T> forward(std::span<const BasicTensor<T>> parts) const;
  std::vector<BasicTensor<T>> backward(const BasicTensor<T>& upstream) const;

 private:
  std::vector<std::size_t> widths_;
};

extern template class Layer<float>;
extern template class Layer<double>;
extern template class Dense<float>;
extern template class Dense<double>;
extern template class Conv2D<float>;
extern template class Conv2D<double>;
extern template class MaxPool2D<float>;
extern template class MaxPool2D<double>;
extern template class Flatten<float>;
extern template class Flatten<double>;
extern template class ReLU<float>;
extern template class ReLU<double>;
extern template class Softmax<float>;
extern template class Softmax<double>;
extern template class Reshape<float>;
extern template class Reshape<double>;
extern template class Concat<float>;
extern template class Concat<double>;

}  // namespace pricefusion::nn
