#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "glyphnet/checkpoint.hpp"
#include "glyphnet/datasets.hpp"
#include "glyphnet/error.hpp"
#include "glyphnet/model.hpp"
#include "glyphnet/raster.hpp"
#include "glyphnet/trainer.hpp"

using namespace glyphnet;

namespace {

const GlyphFont& font() { return GlyphFont::embedded(); }

Tensor random_batch(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution ink(0.2);
  Tensor t(Shape{n, 1, h, w});
  for (auto& v : t.data()) v = ink(rng) ? 1.0f : 0.0f;
  return t;
}

std::vector<std::vector<float>> snapshot(const Model& m) {
  std::vector<std::vector<float>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.begin(), p.end());
  return out;
}

TextSource keyword_source(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  return TextSource(generate_synthetic_classification(classes, per_class, seed), font(), LayoutConfig{},
                    AugmentConfig::disabled());
}

ModelConfig with_outputs(std::size_t k, std::uint64_t seed = 1) {
  ModelConfig c;
  c.num_outputs = k;
  c.seed = seed;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("glyphnet_test_" + name);
}

}  // namespace

TEST(ModelConfig, DefaultTraceAndFlatten) {
  const ModelConfig cfg;
  const auto trace = cfg.spatial_trace();
  const std::vector<std::size_t> expected{64, 32, 16, 8, 4, 2, 1};
  ASSERT_EQ(trace.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(trace[i].first, expected[i]);
    EXPECT_EQ(trace[i].second, expected[i]);
  }
  EXPECT_EQ(cfg.flatten_units(), 64u);
}

TEST(ModelConfig, ParameterCountAudit) {
  ModelConfig cfg;
  cfg.num_outputs = 4;
  const Model model(cfg);
  // Term by term: conv layers, dense 64->128, output 128->4.
  const std::size_t conv = (25 * 1 * 32 + 32) + 2 * (25 * 32 * 32 + 32) + (25 * 32 * 64 + 64) +
                           3 * (25 * 64 * 64 + 64);
  const std::size_t dense = 64 * 128 + 128;
  const std::size_t output = 128 * 4 + 4;
  EXPECT_EQ(dense, 8320u);
  EXPECT_EQ(output, 516u);
  EXPECT_EQ(conv + dense + output, 419588u);
  EXPECT_EQ(cfg.parameter_count(), conv + dense + output);
  EXPECT_EQ(model.parameter_count(), cfg.parameter_count());

  const auto shapes = model.parameter_shapes();
  const auto params = model.parameters();
  ASSERT_EQ(shapes.size(), params.size());
  ASSERT_EQ(shapes.size(), 18u);
  for (std::size_t i = 0; i < shapes.size(); ++i) EXPECT_EQ(shapes[i].size(), params[i].size());
  EXPECT_EQ(shapes[0], (Shape{32, 1, 5, 5}));
  EXPECT_EQ(shapes[14], (Shape{128, 64, 1, 1}));
  EXPECT_EQ(model.parameter_names()[16], "output.weight");
}

TEST(ModelConfig, Validation) {
  ModelConfig cfg;
  cfg.num_outputs = 0;
  EXPECT_THROW(Model{cfg}, ConfigError);
  cfg = ModelConfig{};
  cfg.conv_filters.clear();
  EXPECT_THROW(Model{cfg}, ConfigError);
  cfg = ModelConfig{};
  cfg.stride = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Model, ForwardShapesAndErrors) {
  const Model model{ModelConfig{}};
  const auto logits = model.forward(random_batch(3, 128, 128, 1));
  EXPECT_EQ(logits.rows(), 3u);
  EXPECT_EQ(logits.cols(), 4u);
  EXPECT_THROW(model.forward(Tensor(Shape{1, 1, 64, 64})), ShapeError);
  EXPECT_THROW(model.forward(Tensor(Shape{1, 2, 128, 128})), ShapeError);
  Tensor bad(Shape{1, 1, 128, 128});
  bad[5] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(model.forward(bad), NonFiniteError);
}

TEST(Model, ZeroInputIsDeterministicAndFinite) {
  const Model model{ModelConfig{}};
  const Tensor zeros(Shape{2, 1, 128, 128});
  const auto a = model.forward(zeros);
  EXPECT_EQ(a, model.forward(zeros));
  for (auto v : a.data()) EXPECT_TRUE(std::isfinite(v));
  // Biases start at zero, so a blank page maps to zero logits.
  for (auto v : a.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Model, DuplicatedRowsGiveIdenticalLogits) {
  const Model model{ModelConfig{}};
  Tensor batch = random_batch(3, 128, 128, 2);
  std::copy(batch.sample(0).begin(), batch.sample(0).end(), batch.sample(2).begin());
  const auto logits = model.forward(batch);
  for (std::size_t k = 0; k < logits.cols(); ++k) EXPECT_EQ(logits(0, k), logits(2, k));
  for (std::size_t k = 0; k < logits.cols(); ++k) EXPECT_NE(logits(0, k), logits(1, k));
}

TEST(Model, SinglePixelChangesLogits) {
  const Model model{ModelConfig{}};
  Tensor batch = random_batch(1, 128, 128, 3);
  const auto before = model.forward(batch);
  batch.at(0, 0, 60, 60) = 1.0f - batch.at(0, 0, 60, 60);
  EXPECT_NE(model.forward(batch), before);
}

TEST(Model, ReferenceAndIm2colPathsAgree) {
  Model model{ModelConfig::shrunk()};
  const auto batch = random_batch(2, 16, 16, 4);
  const auto fast = model.forward(batch);
  model.set_reference_conv(true);
  const auto slow = model.forward(batch);
  for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast.data()[i], slow.data()[i], 1e-5);
}

TEST(Model, ShrunkGradientCheck) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto model = Model(ModelConfig::shrunk(3, seed)).cast<double>();
    const auto input = random_batch(2, 16, 16, seed + 100).cast<double>();
    const std::vector<std::size_t> labels{0, 2};
    const auto report = check_model_gradients(model, input, labels);
    EXPECT_TRUE(report.passed()) << report.summary();
  }
}

TEST(Model, InitialLossNearUniform) {
  const auto source = keyword_source(4, 13, 5);
  std::vector<PageImage> pages;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 50; ++i) {
    pages.push_back(source.render(i, nullptr));
    labels.push_back(source.label(i));
  }
  const Model model{ModelConfig{}};
  const auto loss = softmax_cross_entropy(model.forward(images_to_tensor(pages)), labels).loss;
  EXPECT_NEAR(loss, std::log(4.0), 0.2);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto source = keyword_source(2, 6, 6);
  Model model{with_outputs(2)};
  const auto before = snapshot(model);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.optimizer.learning_rate = 0.0;
  const auto history = train(model, source, nullptr, cfg);
  EXPECT_EQ(history.steps, 3u);
  EXPECT_EQ(snapshot(model), before);
}

TEST(Train, StepCountAndHistory) {
  const auto source = keyword_source(2, 5, 7);
  Model model{with_outputs(2, 1)};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.eval_every = 2;
  const auto history = train(model, source, &source, cfg);
  EXPECT_EQ(history.steps, 2u * 3u);
  EXPECT_EQ(history.step_losses.size(), 6u);
  EXPECT_EQ(history.epochs.size(), 2u);
  EXPECT_EQ(history.evaluations.size(), 3u + 2u);
  const std::string csv = metrics_csv(history, false);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_acc,seconds");
  EXPECT_NE(csv.find(",0.000\n"), std::string::npos);
}

TEST(Train, OverfitsTenSamples) {
  const auto source = keyword_source(2, 5, 8);
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.augment = false;

  // Small learning rate: full-batch loss falls at every one of the first 20 steps.
  Model slow{with_outputs(2, 3)};
  cfg.epochs = 20;
  cfg.optimizer.learning_rate = 0.002;
  const auto first = train(slow, source, nullptr, cfg);
  for (std::size_t i = 1; i < first.step_losses.size(); ++i) {
    EXPECT_LT(first.step_losses[i], first.step_losses[i - 1]) << "step " << i;
  }

  Model fast{with_outputs(2, 3)};
  cfg.epochs = 500;
  cfg.optimizer.learning_rate = 0.01;
  double best = 1e9;
  std::size_t reached = 0;
  try {
    train(fast, source, nullptr, cfg, [&](const EpochRecord& r) {
      best = std::min(best, r.train_loss);
      // Stop as soon as the target is met; the remaining epochs add nothing.
      if (r.train_loss < 0.01) {
        reached = r.epoch;
        throw std::runtime_error("done");
      }
    });
  } catch (const std::runtime_error&) {
  }
  EXPECT_GT(reached, 0u) << "best loss " << best;
  EXPECT_LE(reached, 500u);
  const auto report = evaluate(fast, source);
  EXPECT_DOUBLE_EQ(report.accuracy, 1.0);
}

TEST(Train, BitReproducible) {
  const auto source = TextSource(generate_synthetic_classification(2, 6, 9), font(), LayoutConfig{});
  auto run = [&] {
    Model m{with_outputs(2, 4)};
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 5;
    const auto h = train(m, source, &source, cfg);
    return std::make_pair(snapshot(m), h.step_losses);
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, DivergenceIsReported) {
  const auto source = keyword_source(2, 5, 10);
  Model model{with_outputs(2, 1)};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 10;
  cfg.augment = false;
  cfg.optimizer.learning_rate = 1e6;
  try {
    train(model, source, nullptr, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step"), std::string::npos);
    EXPECT_NE(msg.find("lr"), std::string::npos);
  }
}

TEST(Train, RejectsBadConfigAndData) {
  const auto source = keyword_source(4, 2, 11);
  Model binary{with_outputs(2, 1)};
  EXPECT_THROW(train(binary, source, nullptr, TrainConfig{}), ConfigError);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr_decay = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.lr_decay = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Train, LearningRateDecayAppliesFromSecondEpoch) {
  const auto source = keyword_source(2, 5, 13);
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.augment = false;
  auto run = [&](double decay, std::size_t epochs) {
    Model m{with_outputs(2, 2)};
    cfg.lr_decay = decay;
    cfg.epochs = epochs;
    train(m, source, nullptr, cfg);
    return snapshot(m);
  };
  EXPECT_EQ(run(0.5, 1), run(1.0, 1));
  EXPECT_NE(run(0.5, 2), run(1.0, 2));
}

TEST(Evaluate, ConfusionRowsAndRepeatability) {
  const auto source = keyword_source(3, 7, 12);
  const Model model{with_outputs(3, 1)};
  const auto a = evaluate(model, source, 4);
  const auto b = evaluate(model, source, 8, 2);
  ASSERT_EQ(a.confusion.size(), 3u);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(std::accumulate(a.confusion[c].begin(), a.confusion[c].end(), std::size_t{0}), 7u);
    trace += a.confusion[c][c];
  }
  EXPECT_DOUBLE_EQ(a.accuracy, static_cast<double>(trace) / 21.0);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_DOUBLE_EQ(a.loss, b.loss);
}

TEST(Predict, PositivityNeedsBinaryModel) {
  const Model four{ModelConfig{}};
  EXPECT_THROW(predict_positivity(four, "text", font(), LayoutConfig{}), ConfigError);
  const Model two{with_outputs(2, 1)};
  const double p = predict_positivity(two, "this product is great", font(), LayoutConfig{});
  EXPECT_GE(p, 0.0);
  EXPECT_LE(p, 1.0);
  const auto probs = predict_pages(four, {render_text("x", font(), LayoutConfig{})});
  ASSERT_EQ(probs.size(), 1u);
  EXPECT_NEAR(std::accumulate(probs[0].begin(), probs[0].end(), 0.0), 1.0, 1e-6);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Model model{with_outputs(4, 77)};
  const auto path = temp_path("roundtrip.ckpt");
  save_checkpoint({model, 123, "state"}, path);
  const auto loaded = load_checkpoint(path, model.config());
  EXPECT_EQ(loaded.step, 123u);
  EXPECT_EQ(loaded.rng_state, "state");
  EXPECT_EQ(loaded.model.config(), model.config());
  const auto batch = random_batch(2, 128, 128, 5);
  EXPECT_EQ(loaded.model.forward(batch), model.forward(batch));
  EXPECT_EQ(snapshot(loaded.model), snapshot(model));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const Model model{ModelConfig::shrunk()};
  const std::string bytes = encode_checkpoint({model, 0, ""});
  EXPECT_EQ(bytes.substr(0, 4), "TICN");
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), Error);
}

TEST(Checkpoint, ArchitectureMismatchIsAShapeError) {
  ModelConfig two;
  two.num_outputs = 2;
  const auto path = temp_path("k2.ckpt");
  save_checkpoint({Model(two), 0, ""}, path);
  ModelConfig four;
  four.num_outputs = 4;
  EXPECT_THROW(load_checkpoint(path, four), ShapeError);
  four.num_outputs = 2;
  four.seed = 99;
  EXPECT_NO_THROW(load_checkpoint(path, four));
  std::filesystem::remove(path);
}
