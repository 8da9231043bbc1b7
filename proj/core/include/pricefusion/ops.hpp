#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pricefusion/tensor.hpp"

/// Pure tensor kernels. Reductions accumulate in double regardless of T.
namespace pricefusion::ops {

/// [n,k] x [k,m] -> [n,m]
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a^T b for a [k,n], b [k,m] -> [n,m]
template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a b^T for a [n,k], b [m,k] -> [n,m]
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset);

/// Index of the maximum along the last axis; first occurrence wins ties.
template <typename T>
std::vector<std::size_t> argmax_last_axis(const BasicTensor<T>& a);
/// Row sums of a rank-2 tensor, shape [rows].
template <typename T>
BasicTensor<T> row_sum(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> row_mean(const BasicTensor<T>& a);

/// Concatenation of rank-1 tensors in argument order.
template <typename T>
BasicTensor<T> concat(std::span<const BasicTensor<T>> parts);
/// Concatenation of rank-2 tensors along axis 1 (row counts must agree).
template <typename T>
BasicTensor<T> concat_columns(std::span<const BasicTensor<T>> parts);
/// Inverse of concat_columns for the given column widths.
template <typename T>
std::vector<BasicTensor<T>> split_columns(const BasicTensor<T>& a, std::span<const std::size_t> widths);

/// Output spatial extent of a valid window operation.
std::size_t window_output_extent(std::size_t input, std::size_t window, std::size_t stride);

/// Unfolds [N,H,W,C] into [N*H'*W', K*K*C]; column order is (ky, kx, c).
template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input, std::size_t kernel, std::size_t stride);
/// Adjoint of im2col: scatters-adds columns back onto an [N,H,W,C] tensor.
template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& input_shape, std::size_t kernel, std::size_t stride);

/// Valid cross-correlation of [H,W,C] with kernels [K,K,C,F] -> [H',W',F].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride);
/// Batched form over [N,H,W,C] -> [N,H',W',F].
template <typename T>
BasicTensor<T> conv2d_batch(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  /// Flat index into the input of each output element's source maximum.
  std::vector<std::size_t> argmax;
};

/// Per-channel window maximum over [H,W,C]; lowest flat index wins ties.
template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride);
/// Batched form over [N,H,W,C].
template <typename T>
PoolResult<T> maxpool2d_batch(const BasicTensor<T>& input, std::size_t window, std::size_t stride);

}  // namespace pricefusion::ops
