#include "glyphnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "glyphnet/error.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

void ModelConfig::validate() const {
  if (input_h == 0 || input_w == 0) throw ConfigError("model input dimensions must be positive");
  if (kernel == 0) throw ConfigError("model.kernel must be positive");
  if (stride == 0) throw ConfigError("model.stride must be positive");
  if (conv_filters.empty()) throw ConfigError("model needs at least one conv layer");
  for (const auto f : conv_filters) {
    if (f == 0) throw ConfigError("conv layers need at least one filter");
  }
  if (dense_units == 0) throw ConfigError("model.dense_units must be positive");
  if (num_outputs == 0) throw ConfigError("model.num_outputs must be at least 1");
}

std::vector<std::pair<std::size_t, std::size_t>> ModelConfig::spatial_trace() const {
  std::vector<std::pair<std::size_t, std::size_t>> trace;
  std::size_t h = input_h, w = input_w;
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    h = same_output_extent(h, stride);
    w = same_output_extent(w, stride);
    trace.emplace_back(h, w);
  }
  return trace;
}

std::size_t ModelConfig::flatten_units() const {
  const auto trace = spatial_trace();
  return trace.back().first * trace.back().second * conv_filters.back();
}

std::size_t ModelConfig::parameter_count() const {
  std::size_t total = 0, in = 1;
  for (const auto f : conv_filters) {
    total += kernel * kernel * in * f + f;
    in = f;
  }
  total += flatten_units() * dense_units + dense_units;
  total += dense_units * num_outputs + num_outputs;
  return total;
}

ModelConfig ModelConfig::shrunk(std::size_t num_outputs, std::uint64_t seed) {
  ModelConfig c;
  c.input_h = 16;
  c.input_w = 16;
  c.conv_filters = {4, 4};
  c.dense_units = 8;
  c.num_outputs = num_outputs;
  c.seed = seed;
  return c;
}

template <typename T>
std::vector<std::span<const T>> ModelGradients<T>::views() const {
  std::vector<std::span<const T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p);
  return out;
}

namespace {

template <typename T>
void he_uniform(std::span<T> values, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : values) v = static_cast<T>(dist(rng));
}

// Mean number of kernel taps per output position that land inside the input
// rather than in the zero padding, along one axis.
double mean_valid_taps(std::size_t in, std::size_t pad_before, std::size_t kernel, std::size_t stride,
                       std::size_t out) {
  double total = 0.0;
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const long pos = static_cast<long>(o * stride + k) - static_cast<long>(pad_before);
      if (pos >= 0 && pos < static_cast<long>(in)) total += 1.0;
    }
  }
  return total / static_cast<double>(out);
}

}  // namespace

template <typename T>
BasicModel<T>::BasicModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto trace = config_.spatial_trace();
  std::size_t in_c = 1, h = config_.input_h, w = config_.input_w;
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
    const std::size_t out_c = config_.conv_filters[i];
    BasicConvParams<T> layer;
    layer.weights = BasicTensor<T>(Shape{out_c, in_c, config_.kernel, config_.kernel});
    layer.bias.assign(out_c, T{0});
    layer.stride = config_.stride;
    layer.padding = Padding::same(h, w, config_.kernel, config_.kernel, config_.stride);
    // Fan-in counts only taps that can reach the input: on small maps most of
    // a 5x5 window sits in the padding.
    const auto [oh, ow] = trace[i];
    const double taps = mean_valid_taps(h, layer.padding.top, config_.kernel, config_.stride, oh) *
                        mean_valid_taps(w, layer.padding.left, config_.kernel, config_.stride, ow);
    const auto fan_in = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(in_c) * taps)));
    Rng rng = derive_rng(config_.seed, {i});
    he_uniform(layer.weights.data(), fan_in, rng);
    conv_.push_back(std::move(layer));
    in_c = out_c;
    std::tie(h, w) = trace[i];
  }
  hidden_ = BasicDenseParams<T>(config_.flatten_units(), config_.dense_units);
  Rng hidden_rng = derive_rng(config_.seed, {conv_.size()});
  he_uniform(std::span<T>(hidden_.weights), hidden_.in_units, hidden_rng);
  output_ = BasicDenseParams<T>(config_.dense_units, config_.num_outputs);
  Rng output_rng = derive_rng(config_.seed, {conv_.size() + 1});
  he_uniform(std::span<T>(output_.weights), output_.in_units, output_rng);
}

template <typename T>
BasicMatrix<T> BasicModel<T>::forward(const BasicTensor<T>& batch, ForwardCache<T>* cache) const {
  const Shape& s = batch.shape();
  if (s.c != 1 || s.h != config_.input_h || s.w != config_.input_w) {
    throw ShapeError("model expects (N,1," + std::to_string(config_.input_h) + "," + std::to_string(config_.input_w) +
                     ") input, got " + s.str());
  }
  require_finite(batch, "model input");
  if (cache) {
    cache->conv_inputs.clear();
    cache->conv_pre.clear();
  }
  BasicTensor<T> x = batch;
  for (const auto& layer : conv_) {
    BasicTensor<T> pre = reference_conv_ ? conv2d_forward(x, layer) : conv2d_forward_im2col(x, layer);
    BasicTensor<T> act = relu_forward(pre);
    if (cache) {
      cache->conv_inputs.push_back(std::move(x));
      cache->conv_pre.push_back(std::move(pre));
    }
    x = std::move(act);
  }
  BasicMatrix<T> flat = flatten(x);
  BasicMatrix<T> hidden_pre = dense_forward(flat, hidden_);
  BasicMatrix<T> hidden = relu_forward(hidden_pre);
  BasicMatrix<T> logits = dense_forward(hidden, output_);
  require_finite(logits, "logits");
  if (cache) {
    cache->flat = std::move(flat);
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden = std::move(hidden);
  }
  return logits;
}

template <typename T>
ModelGradients<T> BasicModel<T>::backward(const ForwardCache<T>& cache, const BasicMatrix<T>& dlogits) const {
  if (cache.conv_pre.size() != conv_.size()) throw ShapeError("forward cache does not match the model");
  ModelGradients<T> g;
  g.params.resize(2 * conv_.size() + 4);

  auto out_g = dense_backward(cache.hidden, output_, dlogits);
  g.params[2 * conv_.size() + 2] = std::move(out_g.weights);
  g.params[2 * conv_.size() + 3] = std::move(out_g.bias);

  auto hid_g = dense_backward(cache.flat, hidden_, relu_backward(cache.hidden_pre, out_g.input));
  g.params[2 * conv_.size()] = std::move(hid_g.weights);
  g.params[2 * conv_.size() + 1] = std::move(hid_g.bias);

  BasicTensor<T> upstream = unflatten(hid_g.input, cache.conv_pre.back().shape());
  for (std::size_t i = conv_.size(); i-- > 0;) {
    const BasicTensor<T> dpre = relu_backward(cache.conv_pre[i], upstream);
    auto cg = reference_conv_ ? conv2d_backward(cache.conv_inputs[i], conv_[i], dpre)
                              : conv2d_backward_im2col(cache.conv_inputs[i], conv_[i], dpre);
    g.params[2 * i] = std::move(cg.weights).values();
    g.params[2 * i + 1] = std::move(cg.bias);
    upstream = std::move(cg.input);
  }
  g.input = std::move(upstream);
  return g;
}

template <typename T>
std::vector<std::span<T>> BasicModel<T>::parameters() {
  std::vector<std::span<T>> out;
  for (auto& c : conv_) {
    out.emplace_back(c.weights.data());
    out.emplace_back(c.bias);
  }
  out.emplace_back(hidden_.weights);
  out.emplace_back(hidden_.bias);
  out.emplace_back(output_.weights);
  out.emplace_back(output_.bias);
  return out;
}

template <typename T>
std::vector<std::span<const T>> BasicModel<T>::parameters() const {
  std::vector<std::span<const T>> out;
  for (const auto& c : conv_) {
    out.emplace_back(c.weights.data());
    out.emplace_back(c.bias);
  }
  out.emplace_back(hidden_.weights);
  out.emplace_back(hidden_.bias);
  out.emplace_back(output_.weights);
  out.emplace_back(output_.bias);
  return out;
}

template <typename T>
std::vector<std::string> BasicModel<T>::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    out.push_back("conv" + std::to_string(i + 1) + ".weight");
    out.push_back("conv" + std::to_string(i + 1) + ".bias");
  }
  out.insert(out.end(), {"dense.weight", "dense.bias", "output.weight", "output.bias"});
  return out;
}

template <typename T>
std::vector<Shape> BasicModel<T>::parameter_shapes() const {
  std::vector<Shape> out;
  for (const auto& c : conv_) {
    out.push_back(c.weights.shape());
    out.push_back(Shape{c.bias.size(), 1, 1, 1});
  }
  out.push_back(Shape{hidden_.out_units, hidden_.in_units, 1, 1});
  out.push_back(Shape{hidden_.out_units, 1, 1, 1});
  out.push_back(Shape{output_.out_units, output_.in_units, 1, 1});
  out.push_back(Shape{output_.out_units, 1, 1, 1});
  return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.size();
  return total;
}

template struct ModelGradients<float>;
template struct ModelGradients<double>;
template class BasicModel<float>;
template class BasicModel<double>;

GradientCheckReport check_model_gradients(const BasicModel<double>& model, const BasicTensor<double>& input,
                                          std::span<const std::size_t> labels, const GradientCheckOptions& options) {
  BasicModel<double> live = model;
  ForwardCache<double> cache;
  const auto logits = live.forward(input, &cache);
  const auto loss = softmax_cross_entropy(logits, labels);
  const auto grads = live.backward(cache, loss.grad);

  ForwardCache<double> probe;
  GradientCheckTarget target;
  const auto names = live.parameter_names();
  const auto params = live.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    target.parameters.push_back({names[i], params[i], grads.params[i]});
  }
  const std::vector<std::size_t> label_copy(labels.begin(), labels.end());
  target.loss = [&live, &input, &probe, label_copy] {
    return softmax_cross_entropy(live.forward(input, &probe), label_copy).loss;
  };
  target.activation_signature = [&probe] {
    std::uint64_t h = mask_fingerprint(probe.hidden_pre.data());
    for (const auto& pre : probe.conv_pre) h = mask_fingerprint(pre.data(), h);
    return h;
  };
  return gradient_check(target, options);
}

}  // namespace glyphnet
