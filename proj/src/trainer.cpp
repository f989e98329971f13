#include "glyphnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "glyphnet/error.hpp"
#include "glyphnet/layers.hpp"

namespace glyphnet {

TextSource::TextSource(std::vector<LabeledText> items, const GlyphFont& font, LayoutConfig layout,
                       AugmentConfig augment)
    : items_(std::move(items)), font_(&font), layout_(layout), augment_(std::move(augment)) {
  layout_.validate(font);
  augment_.validate();
}

PageImage TextSource::render(std::size_t index, Rng* rng) const {
  const auto& text = items_.at(index).text;
  if (!rng) return render_text(text, *font_, layout_);
  return augment_sample(text, *font_, layout_, augment_, *rng);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (epochs == 0) throw ConfigError("train.epochs must be at least 1");
  if (workers == 0) throw ConfigError("train.workers must be at least 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train.lr_decay must lie in (0, 1]");
  glyphnet::validate(optimizer);
}

std::string metrics_csv(const TrainHistory& history, bool include_time) {
  std::string out = "epoch,train_loss,val_acc,seconds\n";
  char line[128];
  for (const auto& e : history.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.3f\n", e.epoch, e.train_loss, e.val_accuracy,
                  include_time ? e.seconds : 0.0);
    out += line;
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = count * w / workers, end = count * (w + 1) / workers;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

LossResult<float> batch_loss(const Matrix& logits, std::span<const std::size_t> labels) {
  return logits.cols() == 1 ? logistic_loss(logits, labels) : softmax_cross_entropy(logits, labels);
}

std::size_t predicted_label(std::span<const float> row) {
  if (row.size() == 1) return row[0] > 0.0f ? 1 : 0;
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t label_count(const Model& model) { return std::max<std::size_t>(2, model.config().num_outputs); }

struct SliceResult {
  ModelGradients<float> grads;
  double loss_sum = 0.0;
};

// Forward and backward over one contiguous slice of a batch. The logit
// gradient is rescaled so slices sum to the gradient of the full-batch mean.
SliceResult run_slice(const Model& model, const ExampleSource& data, std::span<const std::size_t> indices,
                      std::size_t batch_total, bool augment, std::uint64_t seed, std::size_t epoch) {
  std::vector<PageImage> pages;
  std::vector<std::size_t> labels;
  pages.reserve(indices.size());
  for (const auto idx : indices) {
    if (augment) {
      Rng rng = derive_rng(seed, {epoch, idx});
      pages.push_back(data.render(idx, &rng));
    } else {
      pages.push_back(data.render(idx, nullptr));
    }
    labels.push_back(data.label(idx));
  }
  ForwardCache<float> cache;
  const Matrix logits = model.forward(images_to_tensor(pages), &cache);
  auto loss = batch_loss(logits, labels);
  const double n = static_cast<double>(indices.size());
  if (!std::isfinite(loss.loss)) throw NonFiniteError("loss is " + std::to_string(loss.loss));
  const auto scale = static_cast<float>(n / static_cast<double>(batch_total));
  for (auto& g : loss.grad.data()) g *= scale;
  SliceResult out{model.backward(cache, loss.grad), loss.loss * n};
  return out;
}

// Logits for a set of pages, forwarded in up to `workers` contiguous slices.
Matrix forward_parallel(const Model& model, const std::vector<PageImage>& pages, std::size_t workers) {
  Matrix logits(pages.size(), model.config().num_outputs);
  const std::size_t parts = std::max<std::size_t>(1, std::min(workers, pages.size()));
  parallel_for(parts, parts, [&](std::size_t s) {
    const std::size_t lo = pages.size() * s / parts, hi = pages.size() * (s + 1) / parts;
    if (lo == hi) return;
    const std::vector<PageImage> slice(pages.begin() + static_cast<std::ptrdiff_t>(lo),
                                       pages.begin() + static_cast<std::ptrdiff_t>(hi));
    const Matrix part = model.forward(images_to_tensor(slice));
    std::copy(part.data().begin(), part.data().end(), logits.data().begin() + static_cast<std::ptrdiff_t>(lo * logits.cols()));
  });
  return logits;
}

std::string divergence_message(const std::string& cause, std::size_t step, double lr,
                               const std::vector<double>& losses) {
  std::ostringstream msg;
  msg << "training diverged at step " << step << " (lr " << lr << "): " << cause
      << "; recent losses:";
  const std::size_t from = losses.size() > 5 ? losses.size() - 5 : 0;
  for (std::size_t i = from; i < losses.size(); ++i) msg << ' ' << losses[i];
  if (losses.empty()) msg << " none";
  return msg.str();
}

}  // namespace

TrainHistory train(Model& model, const ExampleSource& train_data, const ExampleSource* val_data,
                   const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_data.size() == 0) throw ConfigError("training set is empty");
  if (val_data && val_data->size() == 0) throw ConfigError("validation set is empty");
  const std::size_t classes = label_count(model);
  for (std::size_t i = 0; i < train_data.size(); ++i) {
    if (train_data.label(i) >= classes) {
      throw ConfigError("training label " + std::to_string(train_data.label(i)) + " out of range for " +
                        std::to_string(classes) + " classes");
    }
  }

  TrainHistory history;
  OptimizerState opt{config.optimizer, {}};
  std::vector<std::size_t> order(train_data.size());
  const std::size_t n = order.size();
  const std::size_t slices = std::min(config.workers, config.batch_size);

  auto validate_now = [&](std::size_t step) -> double {
    if (!val_data) return 0.0;
    EvalReport r = evaluate(model, *val_data, config.batch_size, config.workers);
    const double acc = r.accuracy;
    history.evaluations.emplace_back(step, std::move(r));
    return acc;
  };

  Rng shuffle_rng;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = Clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng = derive_rng(config.shuffle_seed, {epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    opt.config.learning_rate = config.optimizer.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - begin);
      const std::span<const std::size_t> batch(order.data() + begin, count);
      const std::size_t parts = std::min(slices, count);
      std::vector<SliceResult> results(parts);
      try {
        parallel_for(parts, parts, [&](std::size_t s) {
          const std::size_t lo = count * s / parts, hi = count * (s + 1) / parts;
          results[s] = run_slice(model, train_data, batch.subspan(lo, hi - lo), count, config.augment,
                                 config.augment_seed, epoch);
        });
      } catch (const NonFiniteError& e) {
        throw DivergenceError(divergence_message(e.what(), history.steps + 1, opt.config.learning_rate, history.step_losses));
      }
      double loss_sum = 0.0;
      ModelGradients<float>& total = results[0].grads;
      for (std::size_t s = 0; s < parts; ++s) {
        loss_sum += results[s].loss_sum;
        if (s == 0) continue;
        for (std::size_t p = 0; p < total.params.size(); ++p) {
          auto& dst = total.params[p];
          const auto& src = results[s].grads.params[p];
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      }
      const double batch_loss_value = loss_sum / static_cast<double>(count);
      history.step_losses.push_back(batch_loss_value);
      ++history.steps;
      for (const auto& g : total.params) {
        try {
          require_finite(std::span<const float>(g), "gradient");
        } catch (const NonFiniteError& e) {
          throw DivergenceError(divergence_message(e.what(), history.steps, opt.config.learning_rate, history.step_losses));
        }
      }
      const auto params = model.parameters();
      const auto grads = total.views();
      optimizer_step<float>(params, grads, opt);
      epoch_loss += loss_sum;
      if (config.eval_every > 0 && history.steps % config.eval_every == 0) validate_now(history.steps);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_loss / static_cast<double>(n);
    rec.val_accuracy = validate_now(history.steps);
    rec.seconds = seconds_since(start);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  std::ostringstream state;
  state << shuffle_rng;
  history.rng_state = state.str();
  return history;
}

EvalReport evaluate(const Model& model, const ExampleSource& data, std::size_t batch_size, std::size_t workers) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const auto start = Clock::now();
  const std::size_t classes = label_count(model);
  EvalReport report;
  report.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  report.samples = data.size();
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    std::vector<PageImage> pages(count);
    std::vector<std::size_t> labels(count);
    parallel_for(count, workers, [&](std::size_t i) {
      pages[i] = data.render(begin + i, nullptr);
      labels[i] = data.label(begin + i);
    });
    for (const auto l : labels) {
      if (l >= classes) throw ConfigError("evaluation label " + std::to_string(l) + " out of range");
    }
    const Matrix logits = forward_parallel(model, pages, workers);
    loss_sum += batch_loss(logits, labels).loss * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) ++report.confusion[labels[i]][predicted_label(logits.row(i))];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < classes; ++c) correct += report.confusion[c][c];
  report.accuracy = data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
  report.loss = data.size() ? loss_sum / static_cast<double>(data.size()) : 0.0;
  report.seconds = seconds_since(start);
  return report;
}

std::vector<std::vector<double>> predict_pages(const Model& model, const std::vector<PageImage>& pages,
                                               std::size_t batch_size, std::size_t workers) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::vector<double>> out(pages.size());
  for (std::size_t begin = 0; begin < pages.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, pages.size() - begin);
    const std::vector<PageImage> batch(pages.begin() + static_cast<std::ptrdiff_t>(begin),
                                       pages.begin() + static_cast<std::ptrdiff_t>(begin + count));
    const Matrix logits = forward_parallel(model, batch, workers);
    if (logits.cols() == 1) {
      for (std::size_t i = 0; i < count; ++i) out[begin + i] = {sigmoid(logits(i, 0))};
      continue;
    }
    const Matrix p = softmax(logits);
    for (std::size_t i = 0; i < count; ++i) out[begin + i].assign(p.row(i).begin(), p.row(i).end());
  }
  return out;
}

double predict_positivity(const Model& model, std::string_view text, const GlyphFont& font,
                          const LayoutConfig& layout) {
  if (model.config().num_outputs != 2) {
    throw ConfigError("positivity needs a binary classifier, model has " +
                      std::to_string(model.config().num_outputs) + " outputs");
  }
  return predict_pages(model, {render_text(text, font, layout)})[0][1];
}

}  // namespace glyphnet
