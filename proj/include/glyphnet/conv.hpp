#pragma once

#include <cstddef>
#include <vector>

#include "glyphnet/tensor.hpp"

namespace glyphnet {

/// Explicit zero padding in pixels per side.
struct Padding {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  /// Padding that makes the output extent ceil(in/stride) along each axis.
  /// An odd total goes to the bottom/right side.
  static Padding same(std::size_t in_h, std::size_t in_w, std::size_t kernel_h, std::size_t kernel_w,
                      std::size_t stride);

  bool operator==(const Padding&) const = default;
};

/// Output extent of a strided window along one axis; 0 when the padded input
/// is smaller than the kernel.
std::size_t conv_output_extent(std::size_t in, std::size_t pad_before, std::size_t pad_after,
                               std::size_t kernel, std::size_t stride);

/// ceil(in / stride), the extent produced by same-padding.
constexpr std::size_t same_output_extent(std::size_t in, std::size_t stride) {
  return (in + stride - 1) / stride;
}

template <typename T>
struct BasicConvParams {
  /// (out_channels, in_channels, kernel_h, kernel_w)
  BasicTensor<T> weights;
  std::vector<T> bias;
  std::size_t stride = 1;
  Padding padding{};

  std::size_t out_channels() const noexcept { return weights.shape().n; }
  std::size_t in_channels() const noexcept { return weights.shape().c; }
  std::size_t kernel_h() const noexcept { return weights.shape().h; }
  std::size_t kernel_w() const noexcept { return weights.shape().w; }

  template <typename U>
  BasicConvParams<U> cast() const {
    return {weights.template cast<U>(), std::vector<U>(bias.begin(), bias.end()), stride, padding};
  }
};

using ConvParams = BasicConvParams<float>;

template <typename T>
struct ConvGradients {
  BasicTensor<T> weights;
  std::vector<T> bias;
  BasicTensor<T> input;
};

/// Validates input/params compatibility and returns the output shape.
/// Throws ShapeError or ConfigError.
template <typename T>
Shape conv2d_output_shape(const Shape& input, const BasicConvParams<T>& params);

/// Reference convolution: one explicit loop per output element, accumulated in double.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& params);

/// Reference backward pass matching conv2d_forward.
template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                                 const BasicTensor<T>& upstream);

/// Unrolls the padded receptive fields of one sample into a
/// (C*kh*kw) x (out_h*out_w) row-major matrix.
template <typename T>
void im2col(std::span<const T> sample, const Shape& input, const BasicConvParams<T>& params,
            std::size_t out_h, std::size_t out_w, std::span<T> columns);

/// Scatter-adds a column matrix back into a (zeroed) sample gradient.
template <typename T>
void col2im(std::span<const T> columns, const Shape& input, const BasicConvParams<T>& params,
            std::size_t out_h, std::size_t out_w, std::span<T> sample);

/// GEMM-backed convolution with the same contract as conv2d_forward.
template <typename T>
BasicTensor<T> conv2d_forward_im2col(const BasicTensor<T>& input, const BasicConvParams<T>& params);

/// GEMM-backed backward pass with the same contract as conv2d_backward.
template <typename T>
ConvGradients<T> conv2d_backward_im2col(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                                        const BasicTensor<T>& upstream);

}  // namespace glyphnet
