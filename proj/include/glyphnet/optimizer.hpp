#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace glyphnet {

enum class OptimizerKind { sgd, momentum };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::momentum;
  double learning_rate = 0.01;
  double momentum = 0.9;
};

/// Per-parameter velocities plus the hyperparameters that drive them.
/// Velocities are allocated lazily on the first step.
template <typename T>
struct BasicOptimizerState {
  OptimizerConfig config;
  std::vector<std::vector<T>> velocity;
};

using OptimizerState = BasicOptimizerState<float>;

/// Throws ConfigError for a negative learning rate or momentum outside [0,1).
void validate(const OptimizerConfig& config);

/// SGD:      p <- p - lr*g
/// Momentum: v <- mu*v - lr*g;  p <- p + v
/// `params[i]` and `grads[i]` must have equal length; throws ShapeError otherwise.
template <typename T>
void optimizer_step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads,
                    BasicOptimizerState<T>& state);

}  // namespace glyphnet
