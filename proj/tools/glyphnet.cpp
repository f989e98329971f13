// glyphnet command-line front end: render, gen, train, eval, predict.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "glyphnet/augment.hpp"
#include "glyphnet/checkpoint.hpp"
#include "glyphnet/datasets.hpp"
#include "glyphnet/dialog.hpp"
#include "glyphnet/error.hpp"
#include "glyphnet/font.hpp"
#include "glyphnet/raster.hpp"
#include "glyphnet/run_config.hpp"
#include "glyphnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace glyphnet;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitDivergence = 3;

/// Options shared by every verb that reads a run config.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> sets;
  bool print_config = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run-config file (section.key = value lines)");
    cmd->add_option("--set", sets, "override one key, e.g. --set train.epochs=3")->take_all();
    cmd->add_flag("--print-config", print_config, "print the effective config to stdout");
  }

  RunConfig load() const {
    RunConfig cfg;
    if (!config_path.empty()) load_run_config(config_path, cfg);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    apply_seed_override(cfg);
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string pick(const std::string& flag, const std::string& configured, const char* what) {
  const std::string v = flag.empty() ? configured : flag;
  if (v.empty()) throw ConfigError(std::string("no ") + what + " given (flag or paths.* key)");
  if (!fs::exists(v)) throw ConfigError(std::string(what) + " '" + v + "' does not exist");
  return v;
}

BabiCorpus load_dialogs(const std::string& path, const std::string& candidates) {
  BabiCorpus corpus = load_babi_dialogs(path);
  if (!candidates.empty()) {
    if (!fs::exists(candidates)) throw ConfigError("candidates file '" + candidates + "' does not exist");
    corpus.candidates = load_candidates(candidates);
  }
  return corpus;
}

std::string confusion_text(const EvalReport& r) {
  std::ostringstream out;
  out << "confusion (rows = true class, columns = predicted)\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << "  " << i << ":";
    for (const auto v : r.confusion[i]) out << ' ' << v;
    out << '\n';
  }
  return out.str();
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
  ConfigOptions cfg;
  std::string text, file, out;
  bool preview = false;
  std::uint64_t seed = 7;
  std::size_t count = 8;
};

int cmd_render(const RenderArgs& a) {
  RunConfig cfg = a.cfg.load();
  if (a.cfg.print_config) std::cout << format_run_config(cfg);
  const GlyphFont font = load_font_or_embedded(cfg.paths.font);
  cfg.layout.validate(font);
  std::string text = a.text;
  if (!a.file.empty()) text = read_text(a.file);
  if (text.empty() && a.file.empty()) {
    if (!a.preview) throw ConfigError("render needs --text or --file");
    text = "the quick brown fox jumps over the lazy dog 4 star";
  }
  PageImage image;
  if (a.preview) {
    std::vector<PageImage> pages;
    for (std::size_t i = 0; i < a.count; ++i) {
      Rng rng = derive_rng(a.seed, {i});
      pages.push_back(augment_sample(text, font, cfg.layout, cfg.augment, rng));
    }
    image = make_grid(pages, 4);
  } else {
    image = render_text(text, font, cfg.layout);
  }
  write_pgm(image, a.out);
  std::cout << "wrote " << a.out << " (" << image.width << "x" << image.height << ")\n";
  return 0;
}

// --- gen --------------------------------------------------------------------

struct GenArgs {
  std::string task = "classify";
  std::string kind = "keywords";
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 500;
  double neutral_fraction = 0.2;
  std::size_t dialogs = 700;
  std::size_t restaurants = 20;
  std::vector<double> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
  std::string out_dir;
};

int cmd_gen(const GenArgs& a) {
  if (a.split.size() != 3) throw ConfigError("--split needs three fractions");
  const std::array<double, 3> fractions{a.split[0], a.split[1], a.split[2]};
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const Task task = parse_task(a.task);
  if (task == Task::classify) {
    std::vector<LabeledText> corpus;
    if (a.kind == "keywords") {
      corpus = generate_synthetic_classification(a.num_classes, a.samples_per_class, a.seed);
    } else if (a.kind == "sentiment") {
      corpus = generate_synthetic_sentiment(a.samples_per_class, a.neutral_fraction, a.seed);
    } else {
      throw ConfigError("unknown --kind '" + a.kind + "' (expected keywords or sentiment)");
    }
    const auto parts = split_dataset(corpus, fractions, a.seed);
    write_csv_corpus(dir / "train.csv", parts.train);
    write_csv_corpus(dir / "val.csv", parts.val);
    write_csv_corpus(dir / "test.csv", parts.test);
    std::cout << "train=" << parts.train.size() << " val=" << parts.val.size() << " test=" << parts.test.size()
              << "\n";
  } else {
    const BabiCorpus corpus = generate_synthetic_dialogs(a.dialogs, a.restaurants, a.seed);
    const auto parts = split_dataset(corpus.dialogs, fractions, a.seed);
    write_babi_dialogs(dir / "train.txt", parts.train);
    write_babi_dialogs(dir / "val.txt", parts.val);
    write_babi_dialogs(dir / "test.txt", parts.test);
    write_candidates(dir / "candidates.txt", corpus.candidates);
    std::cout << "train=" << parts.train.size() << " val=" << parts.val.size() << " test=" << parts.test.size()
              << " candidates=" << corpus.candidates.size() << "\n";
  }
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  ConfigOptions cfg;
  std::string task = "classify";
  std::string out, metrics, train_path, val_path, candidates;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = a.cfg.load();
  if (a.cfg.print_config) std::cout << format_run_config(cfg);
  const GlyphFont font = load_font_or_embedded(cfg.paths.font);
  cfg.validate(font);
  const Task task = parse_task(a.task);
  const ModelConfig mc = cfg.model_for(task);
  Model model(mc);

  const fs::path out(a.out);
  const fs::path metrics_path = a.metrics.empty() ? fs::path(a.out + ".metrics.csv") : fs::path(a.metrics);
  const std::string train_path = pick(a.train_path, cfg.paths.train, "training data");
  const std::string val_flag = a.val_path.empty() ? cfg.paths.val : a.val_path;

  auto log_epoch = [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %zu  train_loss %.4f  val_acc %.4f  %.1fs\n", e.epoch, e.train_loss, e.val_accuracy,
                 e.seconds);
  };

  TrainHistory history;
  if (task == Task::classify) {
    std::vector<std::string> warnings;
    TextSource train_src(load_csv_corpus(train_path, cfg.num_classes, &warnings), font, cfg.layout, cfg.augment);
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::unique_ptr<TextSource> val_src;
    if (!val_flag.empty()) {
      val_src = std::make_unique<TextSource>(load_csv_corpus(pick(val_flag, "", "validation data"), cfg.num_classes),
                                             font, cfg.layout, cfg.augment);
    }
    TrainConfig tc = cfg.train;
    tc.augment_seed = cfg.augment.rng_seed;
    history = train(model, train_src, val_src.get(), tc, log_epoch);
  } else {
    const std::string cand = a.candidates.empty() ? cfg.paths.candidates : a.candidates;
    const BabiCorpus corpus = load_dialogs(train_path, cand);
    DialogAugment aug = cfg.dialog.augment;
    aug.enabled = cfg.train.augment;
    if (cfg.dialog.geometric) aug.geometric = cfg.augment;
    auto instances = build_instances(corpus.dialogs, corpus.candidates, cfg.dialog.negatives_per_positive,
                                     cfg.dialog.hard, cfg.dialog.instance_seed);
    PairSource train_src(std::move(instances), font, cfg.dialog.layout, aug);
    std::unique_ptr<PairSource> val_src;
    if (!val_flag.empty()) {
      const BabiCorpus val = load_dialogs(pick(val_flag, "", "validation data"), cand);
      CandidateSet pool = corpus.candidates;
      for (const auto& c : val.candidates.candidates) pool.add(c);
      val_src = std::make_unique<PairSource>(
          build_instances(val.dialogs, pool, cfg.dialog.negatives_per_positive, cfg.dialog.hard,
                          cfg.dialog.instance_seed + 1),
          font, cfg.dialog.layout, aug);
    }
    TrainConfig tc = cfg.train;
    tc.augment_seed = cfg.augment.rng_seed;
    history = train(model, train_src, val_src.get(), tc, log_epoch);
  }

  save_checkpoint(Checkpoint{model, history.steps, history.rng_state}, out);
  write_text(metrics_path, metrics_csv(history, cfg.record_seconds));
  write_text(fs::path(a.out + ".config"), format_run_config(cfg));
  const auto& last = history.epochs.back();
  std::printf("steps=%zu\nfinal_train_loss=%.6f\nfinal_val_acc=%.6f\n", history.steps, last.train_loss,
              last.val_accuracy);
  std::printf("checkpoint=%s\nmetrics=%s\n", out.string().c_str(), metrics_path.string().c_str());
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  ConfigOptions cfg;
  std::string task = "classify";
  std::string checkpoint, data, candidates, json_out, kv_out;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = a.cfg.load();
  if (a.cfg.print_config) std::cout << format_run_config(cfg);
  const GlyphFont font = load_font_or_embedded(cfg.paths.font);
  cfg.validate(font);
  const Task task = parse_task(a.task);
  const Checkpoint ck = load_checkpoint(a.checkpoint, cfg.model_for(task));
  const std::string data = pick(a.data, cfg.paths.test, "evaluation data");
  nlohmann::ordered_json json;
  std::string kv;
  if (task == Task::classify) {
    TextSource src(load_csv_corpus(data, cfg.num_classes), font, cfg.layout);
    const EvalReport r = evaluate(ck.model, src, cfg.train.batch_size, cfg.train.workers);
    std::printf("accuracy=%.6f\nloss=%.6f\nsamples=%zu\n", r.accuracy, r.loss, r.samples);
    std::cout << confusion_text(r);
    json = {{"task", "classify"}, {"accuracy", r.accuracy}, {"loss", r.loss}, {"samples", r.samples},
            {"confusion", r.confusion}};
    char buf[128];
    std::snprintf(buf, sizeof buf, "accuracy=%.6f\nloss=%.6f\nsamples=%zu\n", r.accuracy, r.loss, r.samples);
    kv = buf;
  } else {
    const std::string cand = a.candidates.empty() ? cfg.paths.candidates : a.candidates;
    const BabiCorpus corpus = load_dialogs(data, cand);
    const DialogEvalReport r =
        evaluate_dialogs(ck.model, corpus.dialogs, corpus.candidates, font, cfg.dialog.layout, cfg.train.workers);
    std::cout << r.table();
    json = {{"task", "dialog"},
            {"per_response_accuracy", r.per_response_accuracy},
            {"per_dialog_accuracy", r.per_dialog_accuracy},
            {"turns", r.turns},
            {"correct_turns", r.correct_turns},
            {"dialogs", r.dialogs},
            {"correct_dialogs", r.correct_dialogs}};
    kv = r.key_values();
  }
  if (!a.json_out.empty()) write_text(a.json_out, json.dump(2) + "\n");
  if (!a.kv_out.empty()) write_text(a.kv_out, kv);
  return 0;
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
  ConfigOptions cfg;
  std::string checkpoint, text;
  bool positivity = false;
};

int cmd_predict(const PredictArgs& a) {
  if (a.text.empty()) throw ConfigError("--text must not be empty");
  RunConfig cfg = a.cfg.load();
  if (a.cfg.print_config) std::cout << format_run_config(cfg);
  const GlyphFont font = load_font_or_embedded(cfg.paths.font);
  cfg.layout.validate(font);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (a.positivity) {
    std::printf("positivity_score=%.2f\n", predict_positivity(ck.model, a.text, font, cfg.layout));
    return 0;
  }
  const auto probs = predict_pages(ck.model, {render_text(a.text, font, cfg.layout)})[0];
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  std::printf("class=%zu\n", probs.size() == 1 ? (probs[0] > 0.5 ? 1 : 0) : best);
  for (std::size_t i = 0; i < probs.size(); ++i) std::printf("p%zu=%.4f\n", i, probs[i]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text classification and dialog response ranking on rendered text images"};
  app.require_subcommand(1);

  RenderArgs render;
  auto* r = app.add_subcommand("render", "render text to a PGM page");
  render.cfg.attach(r);
  r->add_option("--text", render.text, "text to render");
  r->add_option("--file", render.file, "read the text from a file");
  r->add_option("--out", render.out, "output PGM path")->required();
  r->add_flag("--augment-preview", render.preview, "write a grid of augmented variants");
  r->add_option("--seed", render.seed, "augmentation seed for the preview");
  r->add_option("--count", render.count, "variants in the preview grid")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate synthetic corpora");
  g->add_option("--task", gen.task, "classify or dialog");
  g->add_option("--kind", gen.kind, "classify corpus: keywords or sentiment");
  g->add_option("--num-classes", gen.num_classes, "keyword corpus class count");
  g->add_option("--samples-per-class", gen.samples_per_class, "samples per class");
  g->add_option("--neutral-fraction", gen.neutral_fraction, "sentiment samples without sentiment words");
  g->add_option("--dialogs", gen.dialogs, "dialog count before splitting");
  g->add_option("--restaurants", gen.restaurants, "restaurants in the synthetic KB");
  g->add_option("--split", gen.split, "train,val,test fractions")->delimiter(',')->expected(3);
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--out-dir", gen.out_dir, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  tr.cfg.attach(t);
  t->add_option("--task", tr.task, "classify or dialog");
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--metrics", tr.metrics, "metrics CSV path (default <out>.metrics.csv)");
  t->add_option("--train", tr.train_path, "training data (overrides paths.train)");
  t->add_option("--val", tr.val_path, "validation data (overrides paths.val)");
  t->add_option("--candidates", tr.candidates, "dialog candidates file");
  t->add_option_function<std::string>(
      "--epochs", [&tr](const std::string& v) { tr.cfg.sets.push_back("train.epochs=" + v); }, "epochs");
  t->add_option_function<std::string>(
      "--batch-size", [&tr](const std::string& v) { tr.cfg.sets.push_back("train.batch_size=" + v); }, "batch size");
  t->add_option_function<std::string>(
      "--lr", [&tr](const std::string& v) { tr.cfg.sets.push_back("train.learning_rate=" + v); }, "learning rate");
  t->add_option_function<std::string>(
      "--workers", [&tr](const std::string& v) { tr.cfg.sets.push_back("train.workers=" + v); }, "worker threads");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  ev.cfg.attach(e);
  e->add_option("--task", ev.task, "classify or dialog");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  e->add_option("--data", ev.data, "evaluation data (overrides paths.test)");
  e->add_option("--candidates", ev.candidates, "dialog candidates file");
  e->add_option("--json-out", ev.json_out, "write the report as JSON");
  e->add_option("--kv-out", ev.kv_out, "write the report as key=value lines");
  e->add_option_function<std::string>(
      "--workers", [&ev](const std::string& v) { ev.cfg.sets.push_back("train.workers=" + v); }, "worker threads");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "score one text");
  pr.cfg.attach(p);
  p->add_option("--checkpoint", pr.checkpoint, "checkpoint path")->required();
  p->add_option("--text", pr.text, "input text")->required();
  p->add_flag("--positivity", pr.positivity, "print the positive-class probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitInput;
  }

  try {
    if (*r) return cmd_render(render);
    if (*g) return cmd_gen(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*p) return cmd_predict(pr);
  } catch (const DivergenceError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitDivergence;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitInput;
  }
  return kExitInput;
}
