#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "glyphnet/augment.hpp"
#include "glyphnet/datasets.hpp"
#include "glyphnet/font.hpp"
#include "glyphnet/model.hpp"
#include "glyphnet/optimizer.hpp"
#include "glyphnet/raster.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

/// A labeled collection whose items are rendered to pages on demand.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t label(std::size_t index) const = 0;
  /// Clean render when `rng` is null, augmented render otherwise.
  virtual PageImage render(std::size_t index, Rng* rng) const = 0;
};

/// Labeled text rendered with `layout`; augmented renders go through augment_sample.
class TextSource : public ExampleSource {
 public:
  TextSource(std::vector<LabeledText> items, const GlyphFont& font, LayoutConfig layout, AugmentConfig augment = {});
  std::size_t size() const override { return items_.size(); }
  std::size_t label(std::size_t index) const override { return items_.at(index).label; }
  PageImage render(std::size_t index, Rng* rng) const override;
  const std::vector<LabeledText>& items() const noexcept { return items_; }

 private:
  std::vector<LabeledText> items_;
  const GlyphFont* font_;
  LayoutConfig layout_;
  AugmentConfig augment_;
};

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 10;
  OptimizerConfig optimizer{};
  /// Epoch e (0-based) runs at learning_rate * lr_decay^e. 1 keeps it constant.
  double lr_decay = 1.0;
  /// Training-time augmentation switch; evaluation is always clean.
  bool augment = true;
  std::uint64_t shuffle_seed = 1;
  /// Master seed of the per-(epoch, sample) augmentation streams.
  std::uint64_t augment_seed = 1;
  /// Extra validation passes every this many steps; 0 evaluates at epoch ends only.
  std::size_t eval_every = 0;
  /// Threads that render and back-propagate slices of each batch. Results are
  /// identical for a fixed worker count; 1 is the reference schedule.
  std::size_t workers = 1;

  /// Throws ConfigError for zero batch size, epochs or workers, lr_decay outside
  /// (0, 1], or a bad optimizer.
  void validate() const;
};

struct EvalReport {
  double loss = 0.0;
  double accuracy = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t samples = 0;
  double seconds = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Mean batch loss of every optimizer step.
  std::vector<double> step_losses;
  /// (step, report) for every validation pass, including epoch ends.
  std::vector<std::pair<std::size_t, EvalReport>> evaluations;
  std::size_t steps = 0;
  /// Shuffle RNG after the final epoch, for checkpointing.
  std::string rng_state;
};

/// Per-epoch metrics as "epoch,train_loss,val_acc,seconds" CSV. Seconds are
/// omitted (written as 0) when `include_time` is false so reruns compare equal.
std::string metrics_csv(const TrainHistory& history, bool include_time = true);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with a per-epoch seeded shuffle. Models with one
/// output use the logistic loss (label 1 = correct); others use softmax
/// cross-entropy. A non-finite loss or activation throws DivergenceError.
TrainHistory train(Model& model, const ExampleSource& train_data, const ExampleSource* val_data,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Clean-render evaluation. A one-output model predicts label 1 when its
/// logit is positive.
EvalReport evaluate(const Model& model, const ExampleSource& data, std::size_t batch_size = 50,
                    std::size_t workers = 1);

/// Softmax probability of class 1 for the clean render of `text`. Throws
/// ConfigError unless the model has exactly two outputs.
double predict_positivity(const Model& model, std::string_view text, const GlyphFont& font,
                          const LayoutConfig& layout);

/// Class probabilities (or a single sigmoid score) for each page.
std::vector<std::vector<double>> predict_pages(const Model& model, const std::vector<PageImage>& pages,
                                               std::size_t batch_size = 50, std::size_t workers = 1);

/// Runs fn(i) for i in [0, count) on up to `workers` threads, each taking a
/// contiguous slice. Exceptions are rethrown on the calling thread.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace glyphnet
