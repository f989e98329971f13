#include "glyphnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "glyphnet/error.hpp"

namespace glyphnet {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max(std::abs(analytic) + std::abs(numeric), floor);
  if (denom == 0.0) return 0.0;
  return std::abs(analytic - numeric) / denom;
}

std::uint64_t mask_fingerprint(std::span<const double> preactivations, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const double v : preactivations) {
    h ^= v > 0.0 ? 0x9eu : 0x3cu;
    h *= 1099511628211ull;
  }
  return h;
}

GradientCheckReport gradient_check(const GradientCheckTarget& target, const GradientCheckOptions& options) {
  if (!target.loss) throw ConfigError("gradient_check: target has no loss function");
  GradientCheckReport report;
  report.tolerance = options.tolerance;
  const double h = options.step;
  const bool track_kinks = static_cast<bool>(target.activation_signature);

  target.loss();
  const std::uint64_t base_signature = track_kinks ? target.activation_signature() : 0;

  for (const auto& param : target.parameters) {
    if (param.values.size() != param.analytic.size()) {
      throw ShapeError("gradient_check: '" + param.name + "' gradient size differs from parameter size");
    }
    GroupCheckReport group;
    group.name = param.name;
    for (std::size_t i = 0; i < param.values.size(); ++i) {
      const double original = param.values[i];
      param.values[i] = original + h;
      const double plus = target.loss();
      const bool plus_kink = track_kinks && target.activation_signature() != base_signature;
      param.values[i] = original - h;
      const double minus = target.loss();
      const bool minus_kink = track_kinks && target.activation_signature() != base_signature;
      param.values[i] = original;
      if (plus_kink || minus_kink) {
        ++group.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(param.analytic[i], numeric, options.denominator_floor);
      ++group.checked;
      if (err >= group.max_relative_error) {
        group.max_relative_error = err;
        group.worst_index = i;
        group.worst_analytic = param.analytic[i];
        group.worst_numeric = numeric;
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, group.max_relative_error);
    report.groups.push_back(group);
  }
  return report;
}

std::string GradientCheckReport::summary() const {
  std::ostringstream out;
  for (const auto& g : groups) {
    out << g.name << ": max_rel_err=" << g.max_relative_error << " checked=" << g.checked
        << " skipped=" << g.skipped << "\n";
  }
  out << "overall: max_rel_err=" << max_relative_error << (passed() ? " PASS" : " FAIL") << " (tol "
      << tolerance << ")";
  return out.str();
}

}  // namespace glyphnet
