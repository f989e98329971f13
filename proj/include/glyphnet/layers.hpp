#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glyphnet/tensor.hpp"

namespace glyphnet {

// Rectifier. The span forms work on any contiguous buffer; tensor and matrix
// overloads are thin wrappers.
template <typename T>
void relu_forward(std::span<const T> input, std::span<T> output);
template <typename T>
void relu_backward(std::span<const T> input, std::span<const T> upstream, std::span<T> grad);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& upstream);
template <typename T>
BasicMatrix<T> relu_forward(const BasicMatrix<T>& input);
template <typename T>
BasicMatrix<T> relu_backward(const BasicMatrix<T>& input, const BasicMatrix<T>& upstream);

/// Fully connected layer, weights row-major (out_units, in_units).
template <typename T>
struct BasicDenseParams {
  std::size_t in_units = 0;
  std::size_t out_units = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  BasicDenseParams() = default;
  BasicDenseParams(std::size_t in, std::size_t out)
      : in_units(in), out_units(out), weights(in * out, T{0}), bias(out, T{0}) {}

  T& weight(std::size_t o, std::size_t i) noexcept { return weights[o * in_units + i]; }
  T weight(std::size_t o, std::size_t i) const noexcept { return weights[o * in_units + i]; }

  template <typename U>
  BasicDenseParams<U> cast() const {
    BasicDenseParams<U> p;
    p.in_units = in_units;
    p.out_units = out_units;
    p.weights.assign(weights.begin(), weights.end());
    p.bias.assign(bias.begin(), bias.end());
    return p;
  }
};

using DenseParams = BasicDenseParams<float>;

template <typename T>
struct DenseGradients {
  std::vector<T> weights;
  std::vector<T> bias;
  BasicMatrix<T> input;
};

/// out[n] = W x[n] + b for every row of `input` (N x in_units).
template <typename T>
BasicMatrix<T> dense_forward(const BasicMatrix<T>& input, const BasicDenseParams<T>& params);

template <typename T>
DenseGradients<T> dense_backward(const BasicMatrix<T>& input, const BasicDenseParams<T>& params,
                                 const BasicMatrix<T>& upstream);

template <typename T>
struct LossResult {
  double loss = 0.0;
  /// d(mean loss)/d(logits), same shape as the logits.
  BasicMatrix<T> grad;
};

/// Row-wise softmax with max subtraction.
template <typename T>
BasicMatrix<T> softmax(const BasicMatrix<T>& logits);

/// Mean negative log-likelihood of `labels` under softmax(logits), plus its gradient.
/// Throws ConfigError for a label outside [0, K) or K == 0.
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicMatrix<T>& logits, std::span<const std::size_t> labels);

/// Logistic loss for a single-logit scorer, routed through softmax_cross_entropy
/// on the two-logit row [0, s]. Labels are 0 (incorrect) or 1 (correct).
template <typename T>
LossResult<T> logistic_loss(const BasicMatrix<T>& scores, std::span<const std::size_t> labels);

double sigmoid(double x);

}  // namespace glyphnet
