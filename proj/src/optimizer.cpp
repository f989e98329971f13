#include "glyphnet/optimizer.hpp"

#include <cmath>

#include "glyphnet/error.hpp"

namespace glyphnet {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "momentum") return OptimizerKind::momentum;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or momentum)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "momentum"; }

void validate(const OptimizerConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
}

template <typename T>
void optimizer_step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads,
                    BasicOptimizerState<T>& state) {
  validate(state.config);
  if (params.size() != grads.size()) throw ShapeError("optimizer: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw ShapeError("optimizer: gradient " + std::to_string(i) + " does not match its parameter");
    }
  }
  const double lr = state.config.learning_rate;
  if (state.config.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        params[i][j] = static_cast<T>(params[i][j] - lr * grads[i][j]);
      }
    }
    return;
  }
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.emplace_back(p.size(), T{0});
  }
  if (state.velocity.size() != params.size()) throw ShapeError("optimizer: velocity count mismatch");
  const double mu = state.config.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.velocity[i];
    if (v.size() != params[i].size()) throw ShapeError("optimizer: velocity shape mismatch");
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = static_cast<T>(mu * v[j] - lr * grads[i][j]);
      params[i][j] += v[j];
    }
  }
}

template void optimizer_step(std::span<const std::span<float>>, std::span<const std::span<const float>>,
                             BasicOptimizerState<float>&);
template void optimizer_step(std::span<const std::span<double>>, std::span<const std::span<const double>>,
                             BasicOptimizerState<double>&);

}  // namespace glyphnet
