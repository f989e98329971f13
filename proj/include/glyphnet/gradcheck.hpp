#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace glyphnet {

/// One parameter group under test: its live values (perturbed in place and
/// restored) and the analytic gradient computed at the unperturbed point.
struct CheckedParameter {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

/// A differentiable fragment. `loss` re-evaluates the scalar loss at the
/// current contents of every `values` span.
///
/// `activation_signature`, when set, fingerprints the rectifier on/off pattern
/// of the most recent `loss` call. A coordinate whose +/- step changes that
/// pattern straddles a kink and is skipped rather than scored.
struct GradientCheckTarget {
  std::vector<CheckedParameter> parameters;
  std::function<double()> loss;
  std::function<std::uint64_t()> activation_signature;
};

struct GradientCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  /// Lower bound on |analytic| + |numeric| in the relative-error denominator,
  /// so coordinates with a vanishing gradient compare on an absolute scale.
  double denominator_floor = 1e-6;
};

struct GroupCheckReport {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradientCheckReport {
  std::vector<GroupCheckReport> groups;
  double max_relative_error = 0.0;
  double tolerance = 0.0;

  bool passed() const noexcept { return max_relative_error <= tolerance; }
  std::string summary() const;
};

/// |a - n| / max(|a| + |n|, floor). A gradient that is off by a factor of two
/// scores 1/3.
double relative_error(double analytic, double numeric, double floor = 0.0);

/// Central differences over every coordinate of every parameter group.
GradientCheckReport gradient_check(const GradientCheckTarget& target, const GradientCheckOptions& options = {});

/// FNV-1a over a rectifier mask, for building activation signatures.
std::uint64_t mask_fingerprint(std::span<const double> preactivations, std::uint64_t seed = 1469598103934665603ull);

}  // namespace glyphnet
