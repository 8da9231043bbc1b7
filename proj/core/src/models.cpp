#include "pricefusion/models.hpp"

#include <cmath>

#include "pricefusion/tensor_io.hpp"

namespace pricefusion {
namespace {

template <typename T>
std::vector<nn::LayerPtr<T>> clone_layers(const std::vector<nn::LayerPtr<T>>& layers) {
  std::vector<nn::LayerPtr<T>> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l->clone());
  return out;
}

template <typename T>
Shape last_output_shape(const std::vector<nn::LayerPtr<T>>& layers, const Shape& fallback) {
  return layers.empty() ? fallback : layers.back()->output_shape();
}

std::size_t rank1_width(const Shape& shape, std::string_view what) {
  if (shape.size() != 1) {
    throw ShapeError(std::string(what) + " must end in a rank-1 output, got " + shape_string(shape));
  }
  return shape[0];
}

template <typename T>
class LayerStack {
 public:
  LayerStack(Shape input, Rng& rng) : shape_(std::move(input)), rng_(rng) {}

  LayerStack& dense(std::size_t out) {
    push(std::make_unique<nn::Dense<T>>(rank1_width(shape_, "dense input"), out, rng_));
    return *this;
  }
  LayerStack& relu() {
    push(std::make_unique<nn::ReLU<T>>(shape_));
    return *this;
  }
  LayerStack& softmax() {
    push(std::make_unique<nn::Softmax<T>>(rank1_width(shape_, "softmax input")));
    return *this;
  }
  LayerStack& flatten() {
    push(std::make_unique<nn::Flatten<T>>(shape_));
    return *this;
  }
  LayerStack& square_matrix(std::size_t side) {
    push(std::make_unique<nn::Reshape<T>>(rank1_width(shape_, "reshape input"), Shape{side, side, 1}));
    return *this;
  }
  LayerStack& conv_stages(const std::vector<std::size_t>& filters, const ArchConfig& arch, std::string_view what) {
    conv_stack_shapes(shape_, filters, arch, what);
    for (auto f : filters) {
      push(std::make_unique<nn::Conv2D<T>>(shape_, arch.kernel, f, arch.conv_stride, rng_));
      relu();
      push(std::make_unique<nn::MaxPool2D<T>>(shape_, arch.pool_window, arch.pool_stride));
    }
    return *this;
  }

  const Shape& shape() const { return shape_; }
  std::vector<nn::LayerPtr<T>> take() { return std::move(layers_); }

 private:
  void push(nn::LayerPtr<T> layer) {
    shape_ = layer->output_shape();
    layers_.push_back(std::move(layer));
  }

  Shape shape_;
  Rng& rng_;
  std::vector<nn::LayerPtr<T>> layers_;
};

template <typename T>
std::vector<nn::LayerPtr<T>> dense_tabular_branch(std::size_t width, const ArchConfig& arch, Rng& rng) {
  if (width < 1) throw std::invalid_argument("tabular width must be at least 1");
  LayerStack<T> s({width}, rng);
  s.dense(arch.tabular_hidden1).relu().dense(arch.tabular_hidden2).relu();
  return s.take();
}

template <typename T>
std::vector<nn::LayerPtr<T>> classifier_head(std::size_t fused, const ArchConfig& arch, Rng& rng) {
  LayerStack<T> s({fused}, rng);
  s.dense(arch.head_hidden).relu().dense(kNumClasses).softmax();
  return s.take();
}

void check_image_shape(const Shape& image_shape) {
  if (image_shape.size() != 3) throw ShapeError("image shape must be [H, W, C], got " + shape_string(image_shape));
}

}  // namespace

std::string_view branch_name(Branch branch) {
  switch (branch) {
    case Branch::Tabular: return "tabular";
    case Branch::Image: return "image";
    case Branch::Head: return "head";
  }
  return "?";
}

template <typename T>
ModelGraph<T>::ModelGraph(ModelSpec spec, std::vector<nn::LayerPtr<T>> tabular,
                          std::optional<std::vector<nn::LayerPtr<T>>> image, std::vector<nn::LayerPtr<T>> head)
    : spec_(std::move(spec)),
      tabular_(std::move(tabular)),
      image_(std::move(image)),
      fusion_({}),
      head_(std::move(head)) {
  std::vector<std::size_t> widths{
      rank1_width(last_output_shape(tabular_, {spec_.tabular_width}), "tabular branch")};
  if (image_) {
    const Shape image_in = image_->empty() ? Shape{spec_.embedding_width} : image_->front()->input_shape();
    widths.push_back(rank1_width(last_output_shape(*image_, image_in), "image branch"));
  }
  fusion_ = nn::Concat<T>(std::move(widths));
  if (head_.empty() || head_.back()->kind() != nn::LayerKind::Softmax ||
      head_.back()->output_shape() != Shape{kNumClasses}) {
    throw ShapeError("model head must end in a 4-way softmax");
  }
  if (head_.front()->input_shape() != Shape{fusion_.output_width()}) {
    throw ShapeError("head input " + shape_string(head_.front()->input_shape()) + " does not match fused width " +
                     std::to_string(fusion_.output_width()));
  }
}

template <typename T>
ModelGraph<T>::ModelGraph(const ModelGraph& other)
    : spec_(other.spec_),
      tabular_(clone_layers(other.tabular_)),
      fusion_(other.fusion_),
      head_(clone_layers(other.head_)) {
  if (other.image_) image_ = clone_layers(*other.image_);
}

template <typename T>
ModelGraph<T>& ModelGraph<T>::operator=(const ModelGraph& other) {
  if (this != &other) *this = ModelGraph(other);
  return *this;
}

template <typename T>
const std::vector<nn::LayerPtr<T>>& ModelGraph<T>::image_layers() const {
  if (!image_) throw std::logic_error("unimodal model has no image branch");
  return *image_;
}

template <typename T>
Shape ModelGraph<T>::tabular_input_shape() const {
  return tabular_.empty() ? Shape{spec_.tabular_width} : tabular_.front()->input_shape();
}

template <typename T>
std::optional<Shape> ModelGraph<T>::image_input_shape() const {
  if (!image_) return std::nullopt;
  return image_->empty() ? Shape{spec_.embedding_width} : image_->front()->input_shape();
}

template <typename T>
void ModelGraph<T>::check_inputs(const BasicTensor<T>& tabular, const BasicTensor<T>* image) const {
  const Shape tab = tabular_input_shape();
  if (tabular.rank() != tab.size() + 1 || !std::equal(tab.begin(), tab.end(), tabular.shape().begin() + 1)) {
    throw ShapeError("tabular input " + shape_string(tabular.shape()) + " does not match [N]" + shape_string(tab));
  }
  if (image_) {
    if (!image) throw std::invalid_argument("model " + std::to_string(spec_.model_id) + " requires an image input");
    const Shape img = *image_input_shape();
    if (image->rank() != img.size() + 1 || !std::equal(img.begin(), img.end(), image->shape().begin() + 1)) {
      throw ShapeError("image input " + shape_string(image->shape()) + " does not match [N]" + shape_string(img));
    }
    if (image->dim(0) != tabular.dim(0)) {
      throw ShapeError("tabular and image batch sizes differ: " + shape_string(tabular.shape()) + " vs " +
                       shape_string(image->shape()));
    }
  }
}

template <typename T>
BasicTensor<T> ModelGraph<T>::forward(const BasicTensor<T>& tabular, const BasicTensor<T>* image) {
  check_inputs(tabular, image);
  std::vector<BasicTensor<T>> parts;
  BasicTensor<T> x = tabular;
  for (auto& l : tabular_) x = l->forward(x);
  parts.push_back(std::move(x));
  if (image_) {
    BasicTensor<T> y = *image;
    for (auto& l : *image_) y = l->forward(y);
    parts.push_back(std::move(y));
  }
  fused_ = fusion_.forward(parts);
  BasicTensor<T> z = fused_;
  for (auto& l : head_) z = l->forward(z);
  return z;
}

template <typename T>
void ModelGraph<T>::backward_head(BasicTensor<T> grad, std::size_t head_end) {
  for (std::size_t i = head_end; i-- > 0;) grad = head_[i]->backward(grad);
  std::vector<BasicTensor<T>> parts = fusion_.backward(grad);
  BasicTensor<T> g = std::move(parts[0]);
  for (std::size_t i = tabular_.size(); i-- > 0;) g = tabular_[i]->backward(g);
  tabular_input_grad_ = std::move(g);
  if (image_) {
    BasicTensor<T> h = std::move(parts[1]);
    for (std::size_t i = image_->size(); i-- > 0;) h = (*image_)[i]->backward(h);
    image_input_grad_ = std::move(h);
  }
}

template <typename T>
void ModelGraph<T>::backward(const BasicTensor<T>& grad_probs) {
  backward_head(grad_probs, head_.size());
}

template <typename T>
void ModelGraph<T>::backward_from_logits(const BasicTensor<T>& grad_logits) {
  backward_head(grad_logits, head_.size() - 1);
}

template <typename T>
Inference<T> ModelGraph<T>::infer(const BasicTensor<T>& tabular, const BasicTensor<T>* image,
                                  const ActivationSink& sink) const {
  check_inputs(tabular, image);
  auto run = [&sink](Branch branch, const std::vector<nn::LayerPtr<T>>& layers, BasicTensor<T> x) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i]->apply(x);
      if (sink) sink(branch, i, *layers[i], x);
    }
    return x;
  };
  std::vector<BasicTensor<T>> parts;
  parts.push_back(run(Branch::Tabular, tabular_, tabular));
  if (image_) parts.push_back(run(Branch::Image, *image_, *image));
  Inference<T> out;
  out.fused = fusion_.forward(parts);
  out.probs = run(Branch::Head, head_, out.fused);
  return out;
}

template <typename T>
std::vector<nn::Parameter<T>> ModelGraph<T>::parameters() {
  std::vector<nn::Parameter<T>> out;
  auto collect = [&out](std::vector<nn::LayerPtr<T>>& layers) {
    for (auto& l : layers) {
      for (auto& p : l->parameters()) out.push_back(p);
    }
  };
  collect(tabular_);
  if (image_) collect(*image_);
  collect(head_);
  return out;
}

template <typename T>
std::size_t ModelGraph<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : const_cast<ModelGraph*>(this)->parameters()) total += p.value->size();
  return total;
}

template <typename T>
std::size_t ModelGraph<T>::count_layers(nn::LayerKind kind) const {
  std::size_t n = 0;
  auto count = [&](const std::vector<nn::LayerPtr<T>>& layers) {
    for (const auto& l : layers) n += l->kind() == kind;
  };
  count(tabular_);
  if (image_) count(*image_);
  count(head_);
  if (kind == nn::LayerKind::Concat) ++n;
  return n;
}

template <typename T>
std::vector<std::string> ModelGraph<T>::describe() const {
  std::vector<std::string> lines;
  auto emit = [&lines](Branch b, const std::vector<nn::LayerPtr<T>>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      lines.push_back(std::string(branch_name(b)) + " " + std::to_string(i) + " " + layers[i]->describe());
    }
  };
  emit(Branch::Tabular, tabular_);
  if (image_) emit(Branch::Image, *image_);
  lines.push_back("fusion 0 " + fusion_.describe());
  emit(Branch::Head, head_);
  return lines;
}

template <typename T>
void ModelGraph<T>::clear_cache() {
  for (auto& l : tabular_) l->clear_cache();
  if (image_) {
    for (auto& l : *image_) l->clear_cache();
  }
  for (auto& l : head_) l->clear_cache();
}

std::size_t next_square_side(std::size_t width) {
  auto side = static_cast<std::size_t>(std::sqrt(static_cast<double>(width)));
  while (side * side < width) ++side;
  while (side > 0 && (side - 1) * (side - 1) >= width) --side;
  return side;
}

std::vector<Shape> conv_stack_shapes(const Shape& input, const std::vector<std::size_t>& filters,
                                     const ArchConfig& arch, std::string_view what) {
  check_image_shape(input);
  std::vector<Shape> shapes;
  Shape s = input;
  for (std::size_t stage = 0; stage < filters.size(); ++stage) {
    auto fail = [&](const char* step) {
      throw ShapeError(std::string(what) + " " + shape_string(input) + " is too small for " +
                       std::to_string(filters.size()) + " conv/pool stages: stage " + std::to_string(stage + 1) +
                       " " + step + " receives " + shape_string(s));
    };
    if (s[0] < arch.kernel || s[1] < arch.kernel) fail("convolution");
    s = {(s[0] - arch.kernel) / arch.conv_stride + 1, (s[1] - arch.kernel) / arch.conv_stride + 1, filters[stage]};
    if (s[0] < arch.pool_window || s[1] < arch.pool_window) fail("max-pool");
    s = {(s[0] - arch.pool_window) / arch.pool_stride + 1, (s[1] - arch.pool_window) / arch.pool_stride + 1, s[2]};
    shapes.push_back(s);
  }
  return shapes;
}

template <typename T>
ModelGraph<T> build_model_1(std::size_t tabular_width, const ArchConfig& arch, std::uint64_t seed) {
  Rng rng(seed);
  auto tabular = dense_tabular_branch<T>(tabular_width, arch, rng);
  LayerStack<T> head({arch.tabular_hidden2}, rng);
  head.dense(kNumClasses).softmax();
  ModelSpec spec{1, tabular_width, std::nullopt, 0, arch};
  return ModelGraph<T>(std::move(spec), std::move(tabular), std::nullopt, head.take());
}

template <typename T>
ModelGraph<T> build_model_2(std::size_t tabular_width, std::size_t embedding_width, const ArchConfig& arch,
                            std::uint64_t seed) {
  if (embedding_width < 1) throw std::invalid_argument("embedding width must be at least 1");
  Rng rng(seed);
  auto tabular = dense_tabular_branch<T>(tabular_width, arch, rng);
  auto head = classifier_head<T>(arch.tabular_hidden2 + embedding_width, arch, rng);
  ModelSpec spec{2, tabular_width, std::nullopt, embedding_width, arch};
  return ModelGraph<T>(std::move(spec), std::move(tabular), std::vector<nn::LayerPtr<T>>{}, std::move(head));
}

template <typename T>
ModelGraph<T> build_model_3(std::size_t tabular_width, const Shape& image_shape, const ArchConfig& arch,
                            std::uint64_t seed) {
  check_image_shape(image_shape);
  conv_stack_shapes(image_shape, arch.image_filters, arch, "image");
  Rng rng(seed);
  auto tabular = dense_tabular_branch<T>(tabular_width, arch, rng);
  LayerStack<T> image(image_shape, rng);
  image.conv_stages(arch.image_filters, arch, "image").flatten().dense(arch.branch_dense).relu();
  auto head = classifier_head<T>(arch.tabular_hidden2 + arch.branch_dense, arch, rng);
  ModelSpec spec{3, tabular_width, image_shape, 0, arch};
  return ModelGraph<T>(std::move(spec), std::move(tabular), image.take(), std::move(head));
}

namespace {

template <typename T>
ModelGraph<T> build_convolutional(int model_id, std::size_t tabular_width, const Shape& image_shape,
                                  const ArchConfig& arch, std::uint64_t seed, bool branch_dense) {
  if (tabular_width < 1) throw std::invalid_argument("tabular width must be at least 1");
  check_image_shape(image_shape);
  const std::size_t side = next_square_side(tabular_width);
  conv_stack_shapes({side, side, 1}, arch.tabular_filters, arch, "tabular matrix");
  conv_stack_shapes(image_shape, arch.image_filters, arch, "image");
  Rng rng(seed);
  LayerStack<T> tabular({tabular_width}, rng);
  tabular.square_matrix(side).conv_stages(arch.tabular_filters, arch, "tabular matrix").flatten();
  if (branch_dense) tabular.dense(arch.branch_dense).relu();
  LayerStack<T> image(image_shape, rng);
  image.conv_stages(arch.image_filters, arch, "image").flatten();
  if (branch_dense) image.dense(arch.branch_dense).relu();
  const std::size_t fused = tabular.shape()[0] + image.shape()[0];
  auto head = classifier_head<T>(fused, arch, rng);
  ModelSpec spec{model_id, tabular_width, image_shape, 0, arch};
  return ModelGraph<T>(std::move(spec), tabular.take(), image.take(), std::move(head));
}

}  // namespace

template <typename T>
ModelGraph<T> build_model_4(std::size_t tabular_width, const Shape& image_shape, const ArchConfig& arch,
                            std::uint64_t seed) {
  return build_convolutional<T>(4, tabular_width, image_shape, arch, seed, false);
}

template <typename T>
ModelGraph<T> build_model_5(std::size_t tabular_width, const Shape& image_shape, const ArchConfig& arch,
                            std::uint64_t seed) {
  return build_convolutional<T>(5, tabular_width, image_shape, arch, seed, true);
}

template <typename T>
ModelGraph<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  auto image = [&spec]() -> const Shape& {
    if (!spec.image_shape) throw ConfigError("model " + std::to_string(spec.model_id) + " requires an image shape");
    return *spec.image_shape;
  };
  switch (spec.model_id) {
    case 1: return build_model_1<T>(spec.tabular_width, spec.arch, seed);
    case 2: return build_model_2<T>(spec.tabular_width, spec.embedding_width, spec.arch, seed);
    case 3: return build_model_3<T>(spec.tabular_width, image(), spec.arch, seed);
    case 4: return build_model_4<T>(spec.tabular_width, image(), spec.arch, seed);
    case 5: return build_model_5<T>(spec.tabular_width, image(), spec.arch, seed);
    default: throw ConfigError("model id must be 1-5, got " + std::to_string(spec.model_id));
  }
}

void require_external_embeddings(const EmbeddingProvider& provider) {
  if (provider.source != EmbeddingProvider::Source::ExternalFile) {
    throw ConfigError("model 2 requires an external embedding file (--embeddings)");
  }
  if (provider.path.empty()) throw ConfigError("model 2 requires an external embedding file (--embeddings)");
}

Tensor load_embeddings(const EmbeddingProvider& provider, std::size_t expected_rows) {
  require_external_embeddings(provider);
  if (!std::filesystem::exists(provider.path)) {
    throw IoError("embedding file not found: " + provider.path.string());
  }
  Tensor e = load_tensor(provider.path);
  if (e.rank() != 2) throw IoError(provider.path.string() + ": embeddings must be rank-2, got " + shape_string(e.shape()));
  if (e.dim(0) != expected_rows) {
    throw IoError(provider.path.string() + ": " + std::to_string(e.dim(0)) + " embedding rows for " +
                  std::to_string(expected_rows) + " records");
  }
  return e;
}

#define PRICEFUSION_INSTANTIATE_MODELS(T)                                                                   \
  template class ModelGraph<T>;                                                                          \
  template ModelGraph<T> build_model_1(std::size_t, const ArchConfig&, std::uint64_t);                   \
  template ModelGraph<T> build_model_2(std::size_t, std::size_t, const ArchConfig&, std::uint64_t);      \
  template ModelGraph<T> build_model_3(std::size_t, const Shape&, const ArchConfig&, std::uint64_t);     \
  template ModelGraph<T> build_model_4(std::size_t, const Shape&, const ArchConfig&, std::uint64_t);     \
  template ModelGraph<T> build_model_5(std::size_t, const Shape&, const ArchConfig&, std::uint64_t);     \
  template ModelGraph<T> build_model(const ModelSpec&, std::uint64_t);

PRICEFUSION_INSTANTIATE_MODELS(float)
PRICEFUSION_INSTANTIATE_MODELS(double)

#undef PRICEFUSION_INSTANTIATE_MODELS

}  // namespace pricefusion
