#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "glyphnet/augment.hpp"
#include "glyphnet/dialog.hpp"
#include "glyphnet/model.hpp"
#include "glyphnet/raster.hpp"
#include "glyphnet/trainer.hpp"

namespace glyphnet {

enum class Task { classify, dialog };
Task parse_task(const std::string& name);
std::string to_string(Task task);

struct DialogSettings {
  PairLayout layout = PairLayout::defaults();
  std::size_t negatives_per_positive = 4;
  HardNegativeConfig hard{};
  /// KB-value char flip during training.
  DialogAugment augment{};
  /// Also apply the augment.* shift/rotate/flip knobs to dialog pages.
  bool geometric = false;
  std::uint64_t instance_seed = 1;
};

struct PathSettings {
  std::string font;
  std::string train;
  std::string val;
  std::string test;
  std::string candidates;
};

/// Everything a CLI run needs. Text form: one `section.key = value` per line,
/// '#' starts a comment.
struct RunConfig {
  LayoutConfig layout{};
  AugmentConfig augment{};
  /// model.* keys; the input size is taken from the page layout of the task.
  ModelConfig model{};
  /// Class count of classification runs.
  std::size_t num_classes = 4;
  TrainConfig train{};
  /// Write wall-clock seconds into the metrics CSV (0 otherwise).
  bool record_seconds = true;
  DialogSettings dialog{};
  PathSettings paths{};

  /// Architecture for `task`: page size from the matching layout, one output
  /// for dialog scoring, num_classes outputs otherwise.
  ModelConfig model_for(Task task) const;
  /// Throws ConfigError for any out-of-range value.
  void validate(const GlyphFont& font) const;
};

/// Applies one key. Throws ConfigError naming the key for an unknown key or a
/// malformed value.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
/// Reads `section.key = value` lines into `config`. Throws ParseError with the
/// line number for syntax errors and unknown keys.
void parse_run_config(std::istream& in, RunConfig& config);
void load_run_config(const std::filesystem::path& path, RunConfig& config);
/// Every key with its effective value, in a stable order; parsing the output
/// reproduces `config`.
std::string format_run_config(const RunConfig& config);
/// All recognised keys.
std::vector<std::string> run_config_keys();

/// When GLYPHNET_SEED is set, it replaces model.seed, train.shuffle_seed,
/// augment.rng_seed and dialog.instance_seed. Returns whether it was applied.
bool apply_seed_override(RunConfig& config);

}  // namespace glyphnet
