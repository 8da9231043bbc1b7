#include "pricefusion/ops.hpp"

#include <algorithm>
#include <string>

namespace pricefusion::ops {
namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_string(shape));
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T, typename F>
BasicTensor<T> elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op, F f) {
  require_same_shape(a, b, op);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  BasicTensor<T> out({n, m});
  std::vector<double> acc(m);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const T* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += av * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < m; ++j) po[i * m + j] = static_cast<T>(acc[j]);
  }
  return out;
}

template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul_tn");
  require_rank(b.shape(), 2, "matmul_tn");
  const std::size_t k = a.dim(0), n = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul_tn: shape mismatch " + shape_string(a.shape()) + "^T x " + shape_string(b.shape()));
  }
  std::vector<double> acc(n * m, 0.0);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = pa + p * n;
    const T* brow = pb + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = acc.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * static_cast<double>(brow[j]);
    }
  }
  BasicTensor<T> out({n, m});
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);
  return out;
}

template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul_nt");
  require_rank(b.shape(), 2, "matmul_nt");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_nt: shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()) +
                     "^T");
  }
  BasicTensor<T> out({n, m});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = pa + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const T* brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<double>(arow[p]) * static_cast<double>(brow[p]);
      out[i * m + j] = static_cast<T>(s);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t n = a.dim(0), m = a.dim(1);
  BasicTensor<T> out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(a, b, "mul", [](T x, T y) { return x * y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + offset;
  return out;
}

template <typename T>
std::vector<std::size_t> argmax_last_axis(const BasicTensor<T>& a) {
  if (a.rank() == 0 || a.shape().back() == 0) throw ShapeError("argmax_last_axis: empty last axis");
  const std::size_t width = a.shape().back();
  const std::size_t rows = a.size() / width;
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
      if (a[r * width + j] > a[r * width + best]) best = j;
    }
    out[r] = best;
  }
  return out;
}

template <typename T>
BasicTensor<T> row_sum(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "row_sum");
  const std::size_t n = a.dim(0), m = a.dim(1);
  BasicTensor<T> out({n});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += a[i * m + j];
    out[i] = static_cast<T>(s);
  }
  return out;
}

template <typename T>
BasicTensor<T> row_mean(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "row_mean");
  if (a.dim(1) == 0) throw ShapeError("row_mean: zero-width rows");
  BasicTensor<T> sums = row_sum(a);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    sums[i] = static_cast<T>(static_cast<double>(sums[i]) / static_cast<double>(a.dim(1)));
  }
  return sums;
}

template <typename T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: at least one part is required");
  std::vector<T> values;
  for (const auto& p : parts) {
    require_rank(p.shape(), 1, "concat");
    values.insert(values.end(), p.data().begin(), p.data().end());
  }
  const std::size_t n = values.size();
  return BasicTensor<T>({n}, std::move(values));
}

template <typename T>
BasicTensor<T> concat_columns(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_columns: at least one part is required");
  const std::size_t rows = parts.front().dim(0);
  std::size_t width = 0;
  for (const auto& p : parts) {
    require_rank(p.shape(), 2, "concat_columns");
    if (p.dim(0) != rows) {
      throw ShapeError("concat_columns: row count mismatch " + shape_string(parts.front().shape()) + " vs " +
                       shape_string(p.shape()));
    }
    width += p.dim(1);
  }
  BasicTensor<T> out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = r * width;
    for (const auto& p : parts) {
      const std::size_t w = p.dim(1);
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.data().begin() + static_cast<std::ptrdiff_t>(offset));
      offset += w;
    }
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> split_columns(const BasicTensor<T>& a, std::span<const std::size_t> widths) {
  require_rank(a.shape(), 2, "split_columns");
  std::size_t total = 0;
  for (auto w : widths) total += w;
  if (total != a.dim(1)) {
    throw ShapeError("split_columns: widths sum to " + std::to_string(total) + " but tensor is " +
                     shape_string(a.shape()));
  }
  const std::size_t rows = a.dim(0);
  std::vector<BasicTensor<T>> out;
  std::size_t col = 0;
  for (auto w : widths) {
    BasicTensor<T> part({rows, w});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(r * total + col), w,
                  part.data().begin() + static_cast<std::ptrdiff_t>(r * w));
    }
    out.push_back(std::move(part));
    col += w;
  }
  return out;
}

std::size_t window_output_extent(std::size_t input, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw std::invalid_argument("window and stride must be positive");
  if (window > input) {
    throw ShapeError("window " + std::to_string(window) + " larger than input extent " + std::to_string(input));
  }
  return (input - window) / stride + 1;
}

template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input, std::size_t kernel, std::size_t stride) {
  require_rank(input.shape(), 4, "im2col");
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const std::size_t oh = window_output_extent(h, kernel, stride);
  const std::size_t ow = window_output_extent(w, kernel, stride);
  const std::size_t patch = kernel * kernel * c;
  BasicTensor<T> cols({n * oh * ow, patch});
  const T* src = input.data().data();
  T* dst = cols.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T* row = dst + ((b * oh + oy) * ow + ox) * patch;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const T* line = src + ((b * h + oy * stride + ky) * w + ox * stride) * c;
          std::copy_n(line, kernel * c, row + ky * kernel * c);
        }
      }
    }
  }
  return cols;
}

template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& input_shape, std::size_t kernel, std::size_t stride) {
  require_rank(input_shape, 4, "col2im");
  const std::size_t n = input_shape[0], h = input_shape[1], w = input_shape[2], c = input_shape[3];
  const std::size_t oh = window_output_extent(h, kernel, stride);
  const std::size_t ow = window_output_extent(w, kernel, stride);
  const std::size_t patch = kernel * kernel * c;
  if (cols.shape() != Shape{n * oh * ow, patch}) {
    throw ShapeError("col2im: columns " + shape_string(cols.shape()) + " incompatible with input " +
                     shape_string(input_shape));
  }
  BasicTensor<T> out(input_shape);
  const T* src = cols.data().data();
  T* dst = out.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T* row = src + ((b * oh + oy) * ow + ox) * patch;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          T* line = dst + ((b * h + oy * stride + ky) * w + ox * stride) * c;
          const T* seg = row + ky * kernel * c;
          for (std::size_t i = 0; i < kernel * c; ++i) line[i] += seg[i];
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> conv2d_batch(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride) {
  require_rank(input.shape(), 4, "conv2d");
  require_rank(kernels.shape(), 4, "conv2d kernels");
  const std::size_t k = kernels.dim(0);
  if (kernels.dim(1) != k) throw ShapeError("conv2d: kernels must be square, got " + shape_string(kernels.shape()));
  if (kernels.dim(2) != input.dim(3)) {
    throw ShapeError("conv2d: kernel channels " + shape_string(kernels.shape()) + " do not match input " +
                     shape_string(input.shape()));
  }
  if (k > input.dim(1) || k > input.dim(2)) {
    throw ShapeError("conv2d: kernel " + shape_string(kernels.shape()) + " larger than input " +
                     shape_string(input.shape()));
  }
  const std::size_t f = kernels.dim(3);
  const std::size_t oh = window_output_extent(input.dim(1), k, stride);
  const std::size_t ow = window_output_extent(input.dim(2), k, stride);
  const BasicTensor<T> cols = im2col(input, k, stride);
  return matmul(cols, kernels.reshape({k * k * input.dim(3), f})).reshape({input.dim(0), oh, ow, f});
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride) {
  require_rank(input.shape(), 3, "conv2d");
  Shape batched{1, input.dim(0), input.dim(1), input.dim(2)};
  BasicTensor<T> out = conv2d_batch(input.reshape(batched), kernels, stride);
  return out.reshape({out.dim(1), out.dim(2), out.dim(3)});
}

template <typename T>
PoolResult<T> maxpool2d_batch(const BasicTensor<T>& input, std::size_t window, std::size_t stride) {
  require_rank(input.shape(), 4, "maxpool2d");
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  if (window > h || window > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " larger than input " +
                     shape_string(input.shape()));
  }
  const std::size_t oh = window_output_extent(h, window, stride);
  const std::size_t ow = window_output_extent(w, window, stride);
  PoolResult<T> result{BasicTensor<T>({n, oh, ow, c}), std::vector<std::size_t>(n * oh * ow * c)};
  const T* src = input.data().data();
  std::size_t out_index = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch, ++out_index) {
          std::size_t best = ((b * h + oy * stride) * w + ox * stride) * c + ch;
          for (std::size_t ky = 0; ky < window; ++ky) {
            for (std::size_t kx = 0; kx < window; ++kx) {
              const std::size_t idx = ((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch;
              if (src[idx] > src[best]) best = idx;
            }
          }
          result.output[out_index] = src[best];
          result.argmax[out_index] = best;
        }
      }
    }
  }
  return result;
}

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride) {
  require_rank(input.shape(), 3, "maxpool2d");
  PoolResult<T> r = maxpool2d_batch(input.reshape({1, input.dim(0), input.dim(1), input.dim(2)}), window, stride);
  const Shape& s = r.output.shape();
  r.output = r.output.reshape({s[1], s[2], s[3]});
  return r;
}

#define PRICEFUSION_INSTANTIATE_OPS(T)                                                                   \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> matmul_tn(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> matmul_nt(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                            \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                             \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                        \
  template std::vector<std::size_t> argmax_last_axis(const BasicTensor<T>&);                           \
  template BasicTensor<T> row_sum(const BasicTensor<T>&);                                              \
  template BasicTensor<T> row_mean(const BasicTensor<T>&);                                             \
  template BasicTensor<T> concat(std::span<const BasicTensor<T>>);                                     \
  template BasicTensor<T> concat_columns(std::span<const BasicTensor<T>>);                             \
  template std::vector<BasicTensor<T>> split_columns(const BasicTensor<T>&, std::span<const std::size_t>); \
  template BasicTensor<T> im2col(const BasicTensor<T>&, std::size_t, std::size_t);                     \
  template BasicTensor<T> col2im(const BasicTensor<T>&, const Shape&, std::size_t, std::size_t);       \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t);           \
  template BasicTensor<T> conv2d_batch(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t);     \
  template PoolResult<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t);                   \
  template PoolResult<T> maxpool2d_batch(const BasicTensor<T>&, std::size_t, std::size_t);

PRICEFUSION_INSTANTIATE_OPS(float)
PRICEFUSION_INSTANTIATE_OPS(double)

#undef PRICEFUSION_INSTANTIATE_OPS

}  // namespace pricefusion::ops
