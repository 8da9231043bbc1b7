#include "pricefusion/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pricefusion::nn {
namespace {

template <typename T>
BasicTensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  BasicTensor<T> w(std::move(shape));
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-limit, limit));
  return w;
}

template <typename T>
void require_cache(bool present, const Layer<T>& layer) {
  if (!present) throw StateError("backward called before forward on layer " + layer.describe());
}

template <typename T>
void add_bias_rows(BasicTensor<T>& out, const BasicTensor<T>& bias) {
  const std::size_t width = bias.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % width];
}

template <typename T>
BasicTensor<T> column_sums(const BasicTensor<T>& grad, std::size_t width) {
  std::vector<double> acc(width, 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) acc[i % width] += grad[i];
  BasicTensor<T> out({width});
  for (std::size_t j = 0; j < width; ++j) out[j] = static_cast<T>(acc[j]);
  return out;
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Softmax: return "Softmax";
    case LayerKind::Concat: return "Concat";
    case LayerKind::Reshape: return "Reshape";
  }
  return "?";
}

template <typename T>
std::size_t Layer<T>::check_batch(const BasicTensor<T>& input) const {
  const Shape& s = input.shape();
  if (s.size() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(), s.begin() + 1)) {
    throw ShapeError(describe() + ": expected input [N]" + shape_string(input_shape_) + ", got " + shape_string(s));
  }
  return s[0];
}

template <typename T>
Shape Layer<T>::batched(std::size_t n, const Shape& per_sample) const {
  Shape out{n};
  out.insert(out.end(), per_sample.begin(), per_sample.end());
  return out;
}

// Dense

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, Rng& rng)
    : Layer<T>({in}),
      weight_(glorot_uniform<T>({in, out}, in, out, rng)),
      bias_({out}),
      weight_grad_({in, out}),
      bias_grad_({out}) {
  if (in == 0 || out == 0) throw std::invalid_argument("Dense layer widths must be positive");
}

template <typename T>
Dense<T>::Dense(BasicTensor<T> weight, BasicTensor<T> bias)
    : Layer<T>({weight.rank() == 2 ? weight.dim(0) : 0}),
      weight_(std::move(weight)),
      bias_(std::move(bias)),
      weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {
  if (weight_.rank() != 2 || bias_.rank() != 1 || bias_.dim(0) != weight_.dim(1)) {
    throw ShapeError("Dense: weight " + shape_string(weight_.shape()) + " and bias " + shape_string(bias_.shape()) +
                     " are inconsistent");
  }
}

template <typename T>
std::string Dense<T>::describe() const {
  return "Dense(" + std::to_string(weight_.dim(0)) + "->" + std::to_string(weight_.dim(1)) + ")";
}

template <typename T>
BasicTensor<T> Dense<T>::apply(const BasicTensor<T>& input) const {
  this->check_batch(input);
  BasicTensor<T> out = ops::matmul(input, weight_);
  add_bias_rows(out, bias_);
  return out;
}

template <typename T>
BasicTensor<T> Dense<T>::forward(const BasicTensor<T>& input) {
  BasicTensor<T> out = apply(input);
  input_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Dense<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(input_.has_value(), *this);
  if (upstream.shape() != Shape{input_->dim(0), weight_.dim(1)}) {
    throw ShapeError(describe() + ": upstream gradient " + shape_string(upstream.shape()) + " does not match output");
  }
  weight_grad_ = ops::matmul_tn(*input_, upstream);
  bias_grad_ = column_sums(upstream, weight_.dim(1));
  return ops::matmul_nt(upstream, weight_);
}

template <typename T>
std::vector<Parameter<T>> Dense<T>::parameters() {
  return {{"weight", &weight_, &weight_grad_, true}, {"bias", &bias_, &bias_grad_, false}};
}

// Conv2D

template <typename T>
Conv2D<T>::Conv2D(Shape input_shape, std::size_t kernel, std::size_t filters, std::size_t stride, Rng& rng)
    : Layer<T>(std::move(input_shape)), kernel_(kernel), filters_(filters), stride_(stride) {
  const Shape& in = this->input_shape();
  if (in.size() != 3) throw ShapeError("Conv2D expects [H, W, C] input, got " + shape_string(in));
  if (kernel == 0 || filters == 0 || stride == 0) throw std::invalid_argument("Conv2D parameters must be positive");
  if (kernel > in[0] || kernel > in[1]) {
    throw ShapeError("Conv2D: kernel " + std::to_string(kernel) + "x" + std::to_string(kernel) +
                     " larger than input " + shape_string(in));
  }
  const std::size_t c = in[2];
  kernels_ = glorot_uniform<T>({kernel, kernel, c, filters}, kernel * kernel * c, kernel * kernel * filters, rng);
  bias_ = BasicTensor<T>({filters});
  kernels_grad_ = BasicTensor<T>(kernels_.shape());
  bias_grad_ = BasicTensor<T>({filters});
}

template <typename T>
std::string Conv2D<T>::describe() const {
  std::ostringstream os;
  os << "Conv2D(" << shape_string(this->input_shape()) << ", k=" << kernel_ << ", f=" << filters_
     << ", s=" << stride_ << ")";
  return os.str();
}

template <typename T>
Shape Conv2D<T>::output_shape() const {
  const Shape& in = this->input_shape();
  return {ops::window_output_extent(in[0], kernel_, stride_), ops::window_output_extent(in[1], kernel_, stride_),
          filters_};
}

template <typename T>
BasicTensor<T> Conv2D<T>::apply(const BasicTensor<T>& input) const {
  const std::size_t n = this->check_batch(input);
  BasicTensor<T> cols = ops::im2col(input, kernel_, stride_);
  BasicTensor<T> out = ops::matmul(cols, kernels_.reshape({cols.dim(1), filters_}));
  add_bias_rows(out, bias_);
  return out.reshape(this->batched(n, output_shape()));
}

template <typename T>
BasicTensor<T> Conv2D<T>::forward(const BasicTensor<T>& input) {
  const std::size_t n = this->check_batch(input);
  BasicTensor<T> cols = ops::im2col(input, kernel_, stride_);
  const std::size_t patch = cols.dim(1);
  BasicTensor<T> out = ops::matmul(cols, kernels_.reshape({patch, filters_}));
  add_bias_rows(out, bias_);
  cols_ = std::move(cols);
  cached_batch_ = n;
  return out.reshape(this->batched(n, output_shape()));
}

template <typename T>
BasicTensor<T> Conv2D<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(cols_.has_value(), *this);
  const Shape expected = this->batched(cached_batch_, output_shape());
  if (upstream.shape() != expected) {
    throw ShapeError(describe() + ": upstream gradient " + shape_string(upstream.shape()) + " expected " +
                     shape_string(expected));
  }
  const std::size_t patch = cols_->dim(1);
  const BasicTensor<T> grad2d = upstream.reshape({cols_->dim(0), filters_});
  kernels_grad_ = ops::matmul_tn(*cols_, grad2d).reshape(kernels_.shape());
  bias_grad_ = column_sums(grad2d, filters_);
  const BasicTensor<T> dcols = ops::matmul_nt(grad2d, kernels_.reshape({patch, filters_}));
  return ops::col2im(dcols, this->batched(cached_batch_, this->input_shape()), kernel_, stride_);
}

template <typename T>
std::vector<Parameter<T>> Conv2D<T>::parameters() {
  return {{"kernels", &kernels_, &kernels_grad_, true}, {"bias", &bias_, &bias_grad_, false}};
}

// MaxPool2D

template <typename T>
MaxPool2D<T>::MaxPool2D(Shape input_shape, std::size_t window, std::size_t stride)
    : Layer<T>(std::move(input_shape)), window_(window), stride_(stride) {
  const Shape& in = this->input_shape();
  if (in.size() != 3) throw ShapeError("MaxPool2D expects [H, W, C] input, got " + shape_string(in));
  if (window == 0 || stride == 0) throw std::invalid_argument("MaxPool2D window and stride must be positive");
  if (window > in[0] || window > in[1]) {
    throw ShapeError("MaxPool2D: window " + std::to_string(window) + " larger than input " + shape_string(in));
  }
}

template <typename T>
std::string MaxPool2D<T>::describe() const {
  return "MaxPool2D(" + shape_string(this->input_shape()) + ", w=" + std::to_string(window_) +
         ", s=" + std::to_string(stride_) + ")";
}

template <typename T>
Shape MaxPool2D<T>::output_shape() const {
  const Shape& in = this->input_shape();
  return {ops::window_output_extent(in[0], window_, stride_), ops::window_output_extent(in[1], window_, stride_),
          in[2]};
}

template <typename T>
BasicTensor<T> MaxPool2D<T>::apply(const BasicTensor<T>& input) const {
  this->check_batch(input);
  return ops::maxpool2d_batch(input, window_, stride_).output;
}

template <typename T>
BasicTensor<T> MaxPool2D<T>::forward(const BasicTensor<T>& input) {
  cached_batch_ = this->check_batch(input);
  auto result = ops::maxpool2d_batch(input, window_, stride_);
  argmax_ = std::move(result.argmax);
  return std::move(result.output);
}

template <typename T>
BasicTensor<T> MaxPool2D<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(argmax_.has_value(), *this);
  if (upstream.size() != argmax_->size()) {
    throw ShapeError(describe() + ": upstream gradient " + shape_string(upstream.shape()) + " does not match output");
  }
  BasicTensor<T> grad(this->batched(cached_batch_, this->input_shape()));
  for (std::size_t i = 0; i < argmax_->size(); ++i) grad[(*argmax_)[i]] += upstream[i];
  return grad;
}

// Flatten

template <typename T>
std::string Flatten<T>::describe() const {
  return "Flatten(" + shape_string(this->input_shape()) + ")";
}

template <typename T>
BasicTensor<T> Flatten<T>::apply(const BasicTensor<T>& input) const {
  const std::size_t n = this->check_batch(input);
  return input.reshape({n, shape_size(this->input_shape())});
}

template <typename T>
BasicTensor<T> Flatten<T>::forward(const BasicTensor<T>& input) {
  cached_batch_ = this->check_batch(input);
  return apply(input);
}

template <typename T>
BasicTensor<T> Flatten<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(cached_batch_.has_value(), *this);
  return upstream.reshape(this->batched(*cached_batch_, this->input_shape()));
}

// ReLU

template <typename T>
BasicTensor<T> ReLU<T>::apply(const BasicTensor<T>& input) const {
  this->check_batch(input);
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
BasicTensor<T> ReLU<T>::forward(const BasicTensor<T>& input) {
  cached_batch_ = this->check_batch(input);
  BasicTensor<T> out(input.shape());
  std::vector<std::uint8_t> active(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    active[i] = input[i] > T{0};
    out[i] = active[i] ? input[i] : T{0};
  }
  active_ = std::move(active);
  return out;
}

template <typename T>
BasicTensor<T> ReLU<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(active_.has_value(), *this);
  if (upstream.size() != active_->size()) {
    throw ShapeError("ReLU: upstream gradient " + shape_string(upstream.shape()) + " does not match forward input");
  }
  BasicTensor<T> grad(upstream.shape());
  for (std::size_t i = 0; i < upstream.size(); ++i) grad[i] = (*active_)[i] ? upstream[i] : T{0};
  return grad;
}

// Softmax

template <typename T>
std::string Softmax<T>::describe() const {
  return "Softmax(" + std::to_string(this->input_shape()[0]) + ")";
}

template <typename T>
BasicTensor<T> Softmax<T>::apply(const BasicTensor<T>& input) const {
  const std::size_t n = this->check_batch(input);
  const std::size_t width = this->input_shape()[0];
  BasicTensor<T> out(input.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = input.data().data() + r * width;
    T* dst = out.data().data() + r * width;
    const T peak = *std::max_element(row, row + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += std::exp(static_cast<double>(row[j] - peak));
    for (std::size_t j = 0; j < width; ++j) dst[j] = static_cast<T>(std::exp(static_cast<double>(row[j] - peak)) / total);
  }
  return out;
}

template <typename T>
BasicTensor<T> Softmax<T>::forward(const BasicTensor<T>& input) {
  output_ = apply(input);
  return *output_;
}

template <typename T>
BasicTensor<T> Softmax<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(output_.has_value(), *this);
  if (upstream.shape() != output_->shape()) {
    throw ShapeError("Softmax: upstream gradient " + shape_string(upstream.shape()) + " does not match output");
  }
  const std::size_t width = this->input_shape()[0];
  const std::size_t n = upstream.size() / width;
  BasicTensor<T> grad(upstream.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < width; ++j) dot += static_cast<double>((*output_)[r * width + j]) * upstream[r * width + j];
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t i = r * width + j;
      grad[i] = static_cast<T>(static_cast<double>((*output_)[i]) * (static_cast<double>(upstream[i]) - dot));
    }
  }
  return grad;
}

// Reshape

template <typename T>
Reshape<T>::Reshape(std::size_t input_width, Shape output_shape)
    : Layer<T>({input_width}), output_shape_(std::move(output_shape)) {
  if (shape_size(output_shape_) < input_width) {
    throw ShapeError("Reshape: target " + shape_string(output_shape_) + " smaller than input width " +
                     std::to_string(input_width));
  }
}

template <typename T>
std::string Reshape<T>::describe() const {
  return "Reshape(" + std::to_string(this->input_shape()[0]) + "->" + shape_string(output_shape_) + ")";
}

template <typename T>
BasicTensor<T> Reshape<T>::apply(const BasicTensor<T>& input) const {
  const std::size_t n = this->check_batch(input);
  const std::size_t in_width = this->input_shape()[0];
  const std::size_t out_width = shape_size(output_shape_);
  BasicTensor<T> out(this->batched(n, output_shape_));
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(input.data().begin() + static_cast<std::ptrdiff_t>(r * in_width), in_width,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * out_width));
  }
  return out;
}

template <typename T>
BasicTensor<T> Reshape<T>::forward(const BasicTensor<T>& input) {
  cached_batch_ = this->check_batch(input);
  return apply(input);
}

template <typename T>
BasicTensor<T> Reshape<T>::backward(const BasicTensor<T>& upstream) {
  require_cache(cached_batch_.has_value(), *this);
  const std::size_t n = *cached_batch_;
  const std::size_t in_width = this->input_shape()[0];
  const std::size_t out_width = shape_size(output_shape_);
  if (upstream.size() != n * out_width) {
    throw ShapeError(describe() + ": upstream gradient " + shape_string(upstream.shape()) + " does not match output");
  }
  BasicTensor<T> grad({n, in_width});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(upstream.data().begin() + static_cast<std::ptrdiff_t>(r * out_width), in_width,
                grad.data().begin() + static_cast<std::ptrdiff_t>(r * in_width));
  }
  return grad;
}

// Concat

template <typename T>
std::string Concat<T>::describe() const {
  std::string s = "Concat(";
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    if (i) s += "+";
    s += std::to_string(widths_[i]);
  }
  return s + ")";
}

template <typename T>
std::size_t Concat<T>::output_width() const {
  std::size_t total = 0;
  for (auto w : widths_) total += w;
  return total;
}

template <typename T>
BasicTensor<T> Concat<T>::forward(std::span<const BasicTensor<T>> parts) const {
  if (parts.size() != widths_.size()) {
    throw ShapeError(describe() + ": expected " + std::to_string(widths_.size()) + " inputs, got " +
                     std::to_string(parts.size()));
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].rank() != 2 || parts[i].dim(1) != widths_[i]) {
      throw ShapeError(describe() + ": input " + std::to_string(i) + " has shape " + shape_string(parts[i].shape()));
    }
  }
  return ops::concat_columns(parts);
}

template <typename T>
std::vector<BasicTensor<T>> Concat<T>::backward(const BasicTensor<T>& upstream) const {
  return ops::split_columns(upstream, std::span<const std::size_t>(widths_));
}

template class Layer<float>;
template class Layer<double>;
template class Dense<float>;
template class Dense<double>;
template class Conv2D<float>;
template class Conv2D<double>;
template class MaxPool2D<float>;
template class MaxPool2D<double>;
template class Flatten<float>;
template class Flatten<double>;
template class ReLU<float>;
template class ReLU<double>;
template class Softmax<float>;
template class Softmax<double>;
template class Reshape<float>;
template class Reshape<double>;
template class Concat<float>;
template class Concat<double>;

}  // namespace pricefusion::nn
