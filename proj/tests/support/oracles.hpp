#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the kernels it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "pricefusion/layers.hpp"
#include "pricefusion/models.hpp"
#include "pricefusion/optim.hpp"
#include "pricefusion/rng.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion::testing {

template <typename T>
BasicTensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Triple-loop matrix product.
inline std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * m + j] += double(a[i * k + p]) * double(b[p * m + j]);
  return out;
}

/// Six-loop valid cross-correlation of [H,W,C] with [K,K,C,F].
inline std::vector<double> naive_conv2d(const Tensor& in, const Tensor& ker, std::size_t stride) {
  const std::size_t h = in.shape()[0], w = in.shape()[1], c = in.shape()[2];
  const std::size_t k = ker.shape()[0], f = ker.shape()[3];
  const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  std::vector<double> out(oh * ow * f, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t o = 0; o < f; ++o)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx)
            for (std::size_t ch = 0; ch < c; ++ch)
              out[(y * ow + x) * f + o] += double(in[((y * stride + ky) * w + x * stride + kx) * c + ch]) *
                                           double(ker[((ky * k + kx) * c + ch) * f + o]);
  return out;
}

struct NaivePool {
  std::vector<float> values;
  std::vector<std::size_t> argmax;
};

/// Window maximum scanning candidates in flat-index order.
inline NaivePool naive_maxpool(const Tensor& in, std::size_t window, std::size_t stride) {
  const std::size_t h = in.shape()[0], w = in.shape()[1], c = in.shape()[2];
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  NaivePool r;
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::vector<std::size_t> candidates;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx)
            candidates.push_back(((y * stride + ky) * w + x * stride + kx) * c + ch);
        std::size_t best = candidates.front();
        for (auto idx : candidates) {
          if (in[idx] > in[best] || (in[idx] == in[best] && idx < best)) best = idx;
        }
        r.values.push_back(in[best]);
        r.argmax.push_back(best);
      }
  return r;
}

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-300 ? 0.0 : std::sqrt(diff) / scale;
}

/// Central difference of f with respect to every element of x.
inline std::vector<double> central_differences(Tensor64& x, const std::function<double()>& f, double h = 1e-3) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

struct GradCheck {
  double worst = 0.0;       ///< largest relative error over all checked tensors
  std::size_t tensors = 0;  ///< number of tensors compared
};

/// Checks a single layer: loss = sum(r * layer(x)) with random r.
inline GradCheck check_layer_gradients(nn::Layer<double>& layer, Tensor64 input, Rng& rng) {
  const Tensor64 probe_out = layer.apply(input);
  const Tensor64 r = random_tensor<double>(probe_out.shape(), rng);
  auto loss = [&]() {
    const Tensor64 y = layer.apply(input);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  layer.forward(input);
  const Tensor64 dx = layer.backward(r);
  GradCheck result;
  const auto numeric_x = central_differences(input, loss);
  result.worst = std::max(result.worst, relative_error({dx.data().begin(), dx.data().end()}, numeric_x));
  ++result.tensors;
  for (auto& p : layer.parameters()) {
    const std::vector<double> analytic(p.grad->data().begin(), p.grad->data().end());
    const auto numeric = central_differences(*p.value, loss);
    result.worst = std::max(result.worst, relative_error(analytic, numeric));
    ++result.tensors;
  }
  return result;
}

/// Redraws every parameter, biases included, with magnitude in [0.05, 0.5].
/// Builders zero the biases, which parks dead ReLU inputs exactly on the kink,
/// and weights near 0 sit on the kink of the L1 term; neither point has a
/// derivative for finite differences to recover.
inline void draw_parameters(ModelGraph<double>& model, Rng& rng) {
  for (auto& p : model.parameters())
    for (auto& v : p.value->data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 0.5);
}

/// Checks a whole graph against the full CE + L1 objective on every weight.
inline GradCheck check_model_gradients(ModelGraph<double>& model, const Tensor64& tabular, const Tensor64* image,
                                       const std::vector<int>& labels, double l1_alpha, bool through_softmax,
                                       double h = 1e-6) {
  auto params = model.parameters();
  auto loss = [&]() {
    const Tensor64 probs = model.infer(tabular, image).probs;
    return nn::loss_ce_l1<double>(probs, labels, params, l1_alpha);
  };
  const Tensor64 probs = model.forward(tabular, image);
  if (through_softmax) {
    model.backward(nn::cross_entropy_prob_grad<double>(probs, labels));
  } else {
    model.backward_from_logits(nn::cross_entropy_logit_grad<double>(probs, labels));
  }
  nn::add_l1_subgradient<double>(params, l1_alpha);
  GradCheck result;
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad->data().begin(), p.grad->data().end());
    const auto numeric = central_differences(*p.value, loss, h);
    result.worst = std::max(result.worst, relative_error(analytic, numeric));
    ++result.tensors;
  }
  return result;
}

/// Small architectures for gradient checks and fast tests.
inline ArchConfig miniature_arch() {
  ArchConfig a;
  a.tabular_hidden1 = 7;
  a.tabular_hidden2 = 5;
  a.head_hidden = 6;
  a.branch_dense = 4;
  a.image_filters = {2, 3, 2};
  a.tabular_filters = {2, 2};
  return a;
}

}  // namespace pricefusion::testing
