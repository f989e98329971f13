#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glyphnet/conv.hpp"
#include "glyphnet/gradcheck.hpp"
#include "glyphnet/layers.hpp"
#include "glyphnet/tensor.hpp"

namespace glyphnet {

/// Layer stack of the text-image CNN: conv+ReLU layers with same-padding,
/// flatten, one rectified dense layer, and a linear output layer.
struct ModelConfig {
  std::size_t input_h = 128;
  std::size_t input_w = 128;
  std::size_t kernel = 5;
  std::size_t stride = 2;
  std::vector<std::size_t> conv_filters{32, 32, 32, 64, 64, 64, 64};
  std::size_t dense_units = 128;
  std::size_t num_outputs = 4;
  std::uint64_t seed = 1;

  /// Throws ConfigError for zero-sized dimensions or an empty conv stack.
  void validate() const;
  /// (height, width) after each conv layer.
  std::vector<std::pair<std::size_t, std::size_t>> spatial_trace() const;
  /// Features entering the dense layer.
  std::size_t flatten_units() const;
  /// Closed-form count of every weight and bias.
  std::size_t parameter_count() const;

  bool operator==(const ModelConfig&) const = default;

  /// Two 5x5 conv layers on a 16x16 input with an 8-unit dense layer; small
  /// enough for exhaustive finite differences.
  static ModelConfig shrunk(std::size_t num_outputs = 3, std::uint64_t seed = 1);
};

/// Intermediate values kept by forward() for backward().
template <typename T>
struct ForwardCache {
  /// Input of each conv layer; [0] is the batch itself.
  std::vector<BasicTensor<T>> conv_inputs;
  /// Pre-activation output of each conv layer.
  std::vector<BasicTensor<T>> conv_pre;
  BasicMatrix<T> flat;
  BasicMatrix<T> hidden_pre;
  BasicMatrix<T> hidden;
};

template <typename T>
struct ModelGradients {
  /// One buffer per parameter group, in parameters() order.
  std::vector<std::vector<T>> params;
  BasicTensor<T> input;

  std::vector<std::span<const T>> views() const;
};

template <typename T>
class BasicModel {
 public:
  BasicModel() = default;
  /// Validates the config and draws He-uniform weights (zero biases) from its seed.
  explicit BasicModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }

  /// Logits (N x num_outputs) for an (N, 1, H, W) batch. Throws ShapeError on
  /// a wrong input shape and NonFiniteError on non-finite input.
  BasicMatrix<T> forward(const BasicTensor<T>& batch, ForwardCache<T>* cache = nullptr) const;
  /// Gradients of a loss whose derivative w.r.t. the logits is `dlogits`.
  ModelGradients<T> backward(const ForwardCache<T>& cache, const BasicMatrix<T>& dlogits) const;

  /// Parameter groups in declaration order: conv weights and bias per layer,
  /// then hidden weights and bias, then output weights and bias.
  std::vector<std::span<T>> parameters();
  std::vector<std::span<const T>> parameters() const;
  std::vector<std::string> parameter_names() const;
  /// Shapes of the parameter groups; dense weights are (out, in, 1, 1) and
  /// biases (n, 1, 1, 1).
  std::vector<Shape> parameter_shapes() const;
  /// Sum of allocated parameter sizes.
  std::size_t parameter_count() const;

  /// Use the direct-loop convolution instead of im2col (slow; for testing).
  void set_reference_conv(bool on) noexcept { reference_conv_ = on; }

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out;
    out.config_ = config_;
    for (const auto& c : conv_) out.conv_.push_back(c.template cast<U>());
    out.hidden_ = hidden_.template cast<U>();
    out.output_ = output_.template cast<U>();
    out.reference_conv_ = reference_conv_;
    return out;
  }

  std::vector<BasicConvParams<T>>& conv_layers() noexcept { return conv_; }
  const std::vector<BasicConvParams<T>>& conv_layers() const noexcept { return conv_; }
  BasicDenseParams<T>& hidden_layer() noexcept { return hidden_; }
  const BasicDenseParams<T>& hidden_layer() const noexcept { return hidden_; }
  BasicDenseParams<T>& output_layer() noexcept { return output_; }
  const BasicDenseParams<T>& output_layer() const noexcept { return output_; }

 private:
  template <typename U>
  friend class BasicModel;

  ModelConfig config_;
  std::vector<BasicConvParams<T>> conv_;
  BasicDenseParams<T> hidden_;
  BasicDenseParams<T> output_;
  bool reference_conv_ = false;
};

using Model = BasicModel<float>;

/// Builds a double-precision copy of `model`, runs softmax cross-entropy on
/// (input, labels) and compares backward() against central differences over
/// every parameter. Rectifier kinks are detected and skipped.
GradientCheckReport check_model_gradients(const BasicModel<double>& model, const BasicTensor<double>& input,
                                          std::span<const std::size_t> labels,
                                          const GradientCheckOptions& options = {});

}  // namespace glyphnet
