#include "glyphnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glyphnet {

template <typename T>
void relu_forward(std::span<const T> input, std::span<T> output) {
  if (input.size() != output.size()) throw ShapeError("relu_forward size mismatch");
  for (std::size_t i = 0; i < input.size(); ++i) output[i] = input[i] > T{0} ? input[i] : T{0};
}

template <typename T>
void relu_backward(std::span<const T> input, std::span<const T> upstream, std::span<T> grad) {
  if (input.size() != upstream.size() || input.size() != grad.size()) {
    throw ShapeError("relu_backward size mismatch");
  }
  for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > T{0} ? upstream[i] : T{0};
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  require_finite(input, "relu_forward input");
  BasicTensor<T> out(input.shape());
  relu_forward<T>(input.data(), out.data());
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& upstream) {
  if (input.shape() != upstream.shape()) {
    throw ShapeError("relu_backward: input " + input.shape().str() + " vs upstream " + upstream.shape().str());
  }
  BasicTensor<T> grad(input.shape());
  relu_backward<T>(input.data(), upstream.data(), grad.data());
  require_finite(grad, "relu_backward gradient");
  return grad;
}

template <typename T>
BasicMatrix<T> relu_forward(const BasicMatrix<T>& input) {
  require_finite(input, "relu_forward input");
  BasicMatrix<T> out(input.rows(), input.cols());
  relu_forward<T>(input.data(), out.data());
  return out;
}

template <typename T>
BasicMatrix<T> relu_backward(const BasicMatrix<T>& input, const BasicMatrix<T>& upstream) {
  if (input.rows() != upstream.rows() || input.cols() != upstream.cols()) {
    throw ShapeError("relu_backward: matrix shapes differ");
  }
  BasicMatrix<T> grad(input.rows(), input.cols());
  relu_backward<T>(input.data(), upstream.data(), grad.data());
  return grad;
}

namespace {

template <typename T>
void check_dense(const BasicMatrix<T>& input, const BasicDenseParams<T>& params) {
  if (params.weights.size() != params.in_units * params.out_units || params.bias.size() != params.out_units) {
    throw ShapeError("dense parameters inconsistent with " + std::to_string(params.in_units) + "->" +
                     std::to_string(params.out_units));
  }
  if (input.cols() != params.in_units) {
    throw ShapeError("dense input has " + std::to_string(input.cols()) + " features, layer expects " +
                     std::to_string(params.in_units));
  }
}

}  // namespace

template <typename T>
BasicMatrix<T> dense_forward(const BasicMatrix<T>& input, const BasicDenseParams<T>& params) {
  check_dense(input, params);
  require_finite(input, "dense_forward input");
  BasicMatrix<T> out(input.rows(), params.out_units);
  for (std::size_t n = 0; n < input.rows(); ++n) {
    const auto x = input.row(n);
    for (std::size_t o = 0; o < params.out_units; ++o) {
      const T* w = params.weights.data() + o * params.in_units;
      double acc = params.bias[o];
      for (std::size_t i = 0; i < params.in_units; ++i) acc += static_cast<double>(w[i]) * x[i];
      out(n, o) = static_cast<T>(acc);
    }
  }
  require_finite(out, "dense_forward output");
  return out;
}

template <typename T>
DenseGradients<T> dense_backward(const BasicMatrix<T>& input, const BasicDenseParams<T>& params,
                                 const BasicMatrix<T>& upstream) {
  check_dense(input, params);
  if (upstream.rows() != input.rows() || upstream.cols() != params.out_units) {
    throw ShapeError("dense upstream gradient has wrong shape");
  }
  std::vector<double> dw(params.weights.size(), 0.0);
  std::vector<double> db(params.out_units, 0.0);
  BasicMatrix<T> dx(input.rows(), params.in_units);
  for (std::size_t n = 0; n < input.rows(); ++n) {
    const auto x = input.row(n);
    for (std::size_t o = 0; o < params.out_units; ++o) {
      const double g = upstream(n, o);
      db[o] += g;
      double* dwo = dw.data() + o * params.in_units;
      for (std::size_t i = 0; i < params.in_units; ++i) dwo[i] += g * x[i];
    }
    for (std::size_t i = 0; i < params.in_units; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < params.out_units; ++o) acc += static_cast<double>(params.weight(o, i)) * upstream(n, o);
      dx(n, i) = static_cast<T>(acc);
    }
  }
  DenseGradients<T> grads{std::vector<T>(dw.begin(), dw.end()), std::vector<T>(db.begin(), db.end()),
                          std::move(dx)};
  require_finite(std::span<const T>(grads.weights), "dense_backward weight gradient");
  require_finite(grads.input, "dense_backward input gradient");
  return grads;
}

template <typename T>
BasicMatrix<T> softmax(const BasicMatrix<T>& logits) {
  require_finite(logits, "softmax logits");
  BasicMatrix<T> probs(logits.rows(), logits.cols());
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    const auto row = logits.row(n);
    if (row.empty()) continue;
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (const T v : row) sum += std::exp(static_cast<double>(v) - mx);
    for (std::size_t k = 0; k < row.size(); ++k) {
      probs(n, k) = static_cast<T>(std::exp(static_cast<double>(row[k]) - mx) / sum);
    }
  }
  return probs;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicMatrix<T>& logits, std::span<const std::size_t> labels) {
  const std::size_t classes = logits.cols();
  if (classes == 0) throw ConfigError("softmax_cross_entropy needs at least one class");
  if (labels.size() != logits.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  }
  require_finite(logits, "softmax_cross_entropy logits");
  const std::size_t rows = logits.rows();
  LossResult<T> result{0.0, BasicMatrix<T>(rows, classes)};
  if (rows == 0) return result;
  const double inv_n = 1.0 / static_cast<double>(rows);
  double total = 0.0;
  std::vector<double> shifted(classes);
  for (std::size_t n = 0; n < rows; ++n) {
    if (labels[n] >= classes) {
      throw ConfigError("label " + std::to_string(labels[n]) + " out of range for " + std::to_string(classes) +
                        " classes (row " + std::to_string(n) + ")");
    }
    const auto row = logits.row(n);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      shifted[k] = static_cast<double>(row[k]) - mx;
      sum += std::exp(shifted[k]);
    }
    const double log_sum = std::log(sum);
    total += log_sum - shifted[labels[n]];
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(shifted[k] - log_sum);
      result.grad(n, k) = static_cast<T>((p - (k == labels[n] ? 1.0 : 0.0)) * inv_n);
    }
  }
  result.loss = total * inv_n;
  return result;
}

template <typename T>
LossResult<T> logistic_loss(const BasicMatrix<T>& scores, std::span<const std::size_t> labels) {
  if (scores.cols() != 1) throw ShapeError("logistic_loss expects one score column");
  BasicMatrix<T> pair(scores.rows(), 2);
  for (std::size_t n = 0; n < scores.rows(); ++n) pair(n, 1) = scores(n, 0);
  auto two = softmax_cross_entropy(pair, labels);
  LossResult<T> result{two.loss, BasicMatrix<T>(scores.rows(), 1)};
  for (std::size_t n = 0; n < scores.rows(); ++n) result.grad(n, 0) = two.grad(n, 1);
  return result;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

#define GLYPHNET_INSTANTIATE_LAYERS(T)                                                                 \
  template void relu_forward(std::span<const T>, std::span<T>);                                        \
  template void relu_backward(std::span<const T>, std::span<const T>, std::span<T>);                   \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                         \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicMatrix<T> relu_forward(const BasicMatrix<T>&);                                         \
  template BasicMatrix<T> relu_backward(const BasicMatrix<T>&, const BasicMatrix<T>&);                 \
  template BasicMatrix<T> dense_forward(const BasicMatrix<T>&, const BasicDenseParams<T>&);            \
  template DenseGradients<T> dense_backward(const BasicMatrix<T>&, const BasicDenseParams<T>&,         \
                                            const BasicMatrix<T>&);                                    \
  template BasicMatrix<T> softmax(const BasicMatrix<T>&);                                              \
  template LossResult<T> softmax_cross_entropy(const BasicMatrix<T>&, std::span<const std::size_t>);   \
  template LossResult<T> logistic_loss(const BasicMatrix<T>&, std::span<const std::size_t>);

GLYPHNET_INSTANTIATE_LAYERS(float)
GLYPHNET_INSTANTIATE_LAYERS(double)

#undef GLYPHNET_INSTANTIATE_LAYERS

}  // namespace glyphnet
