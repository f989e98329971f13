#include "glyphnet/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "glyphnet/error.hpp"

namespace glyphnet {

Task parse_task(const std::string& name) {
  if (name == "classify") return Task::classify;
  if (name == "dialog") return Task::dialog;
  throw ConfigError("unknown task '" + name + "' (expected classify or dialog)");
}

std::string to_string(Task task) { return task == Task::classify ? "classify" : "dialog"; }

ModelConfig RunConfig::model_for(Task task) const {
  ModelConfig m = model;
  if (task == Task::classify) {
    m.input_h = layout.height;
    m.input_w = layout.width;
    m.num_outputs = num_classes;
  } else {
    m.input_h = dialog.layout.page.height;
    m.input_w = dialog.layout.page.width;
    m.num_outputs = 1;
  }
  return m;
}

void RunConfig::validate(const GlyphFont& font) const {
  layout.validate(font);
  augment.validate();
  model_for(Task::classify).validate();
  if (num_classes < 2) throw ConfigError("model.num_classes must be at least 2");
  train.validate();
  dialog.layout.validate(font);
  dialog.hard.validate();
  if (!(dialog.augment.kb_flip_prob >= 0.0 && dialog.augment.kb_flip_prob <= 1.0)) {
    throw ConfigError("dialog.kb_flip_prob must lie in [0, 1]");
  }
}

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

[[noreturn]] void bad(const std::string& value, const char* expected) {
  throw ConfigError("'" + value + "' is not " + expected);
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) bad(s, "a non-negative integer");
  return v;
}

double to_double(const std::string& s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) bad(s, "a number");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad(s, "a boolean");
}

std::vector<std::string> to_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& words, char sep) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(sep);
    out += w;
  }
  return out;
}

std::vector<std::size_t> to_filters(const std::string& s) {
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    out.push_back(to_uint(b == std::string::npos ? "" : item.substr(b, e - b + 1)));
  }
  if (out.empty()) bad(s, "a comma-separated filter list");
  return out;
}

std::string filters_str(const std::vector<std::size_t>& f) {
  std::string out;
  for (const auto v : f) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

#define GN_UINT(KEY, EXPR)                                                             \
  Field {                                                                              \
    KEY, [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.EXPR)); },   \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_uint(v); }                \
  }
#define GN_DOUBLE(KEY, EXPR)                                                                                \
  Field {                                                                                                   \
    KEY, [](const RunConfig& c) { return fmt(static_cast<double>(c.EXPR)); },                               \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_double(v); }                                   \
  }
#define GN_BOOL(KEY, EXPR)                                                                                  \
  Field {                                                                                                   \
    KEY, [](const RunConfig& c) { return fmt(static_cast<bool>(c.EXPR)); },                                 \
        [](RunConfig& c, const std::string& v) { c.EXPR = to_bool(v); }                                     \
  }
#define GN_STRING(KEY, EXPR)                                                                                \
  Field {                                                                                                   \
    KEY, [](const RunConfig& c) { return c.EXPR; }, [](RunConfig& c, const std::string& v) { c.EXPR = v; } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      GN_UINT("layout.width", layout.width),
      GN_UINT("layout.height", layout.height),
      GN_UINT("layout.margin", layout.margin),
      GN_UINT("layout.line_spacing", layout.line_spacing),
      Field{"layout.wrap", [](const RunConfig& c) { return std::string(c.layout.wrap == WrapMode::word ? "word" : "char"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "word") c.layout.wrap = WrapMode::word;
              else if (v == "char") c.layout.wrap = WrapMode::character;
              else bad(v, "word or char");
            }},
      Field{"layout.overflow",
            [](const RunConfig& c) { return std::string(c.layout.overflow == OverflowMode::truncate ? "truncate" : "error"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "truncate") c.layout.overflow = OverflowMode::truncate;
              else if (v == "error") c.layout.overflow = OverflowMode::error;
              else bad(v, "truncate or error");
            }},
      Field{"layout.polarity",
            [](const RunConfig& c) {
              return std::string(c.layout.polarity == Polarity::dark_on_light ? "dark_on_light" : "light_on_dark");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "dark_on_light") c.layout.polarity = Polarity::dark_on_light;
              else if (v == "light_on_dark") c.layout.polarity = Polarity::light_on_dark;
              else bad(v, "dark_on_light or light_on_dark");
            }},
      GN_DOUBLE("layout.binarize_threshold", layout.binarize_threshold),

      GN_BOOL("augment.enabled", train.augment),
      GN_DOUBLE("augment.width_shift_frac", augment.width_shift_frac),
      GN_DOUBLE("augment.height_shift_frac", augment.height_shift_frac),
      GN_DOUBLE("augment.max_rotation_deg", augment.max_rotation_deg),
      GN_DOUBLE("augment.hflip_prob", augment.hflip_prob),
      GN_DOUBLE("augment.charflip_prob", augment.charflip_prob),
      Field{"augment.charflip_classes", [](const RunConfig& c) { return join(c.augment.charflip_classes, ' '); },
            [](RunConfig& c, const std::string& v) { c.augment.charflip_classes = to_words(v); }},
      GN_UINT("augment.rng_seed", augment.rng_seed),

      GN_UINT("model.kernel", model.kernel),
      GN_UINT("model.stride", model.stride),
      Field{"model.conv_filters", [](const RunConfig& c) { return filters_str(c.model.conv_filters); },
            [](RunConfig& c, const std::string& v) { c.model.conv_filters = to_filters(v); }},
      GN_UINT("model.dense_units", model.dense_units),
      GN_UINT("model.num_classes", num_classes),
      GN_UINT("model.seed", model.seed),

      GN_UINT("train.batch_size", train.batch_size),
      GN_UINT("train.epochs", train.epochs),
      Field{"train.optimizer", [](const RunConfig& c) { return to_string(c.train.optimizer.kind); },
            [](RunConfig& c, const std::string& v) { c.train.optimizer.kind = parse_optimizer_kind(v); }},
      GN_DOUBLE("train.learning_rate", train.optimizer.learning_rate),
      GN_DOUBLE("train.momentum", train.optimizer.momentum),
      GN_DOUBLE("train.lr_decay", train.lr_decay),
      GN_UINT("train.shuffle_seed", train.shuffle_seed),
      GN_UINT("train.eval_every", train.eval_every),
      GN_UINT("train.workers", train.workers),
      GN_BOOL("train.record_seconds", record_seconds),

      GN_UINT("dialog.width", dialog.layout.page.width),
      GN_UINT("dialog.height", dialog.layout.page.height),
      GN_UINT("dialog.margin", dialog.layout.page.margin),
      GN_UINT("dialog.candidate_rows", dialog.layout.candidate_rows),
      GN_UINT("dialog.negatives_per_positive", dialog.negatives_per_positive),
      GN_BOOL("dialog.hard_negatives", dialog.hard.enabled),
      GN_DOUBLE("dialog.hard_fraction", dialog.hard.hard_fraction),
      GN_UINT("dialog.hard_pool", dialog.hard.pool),
      GN_UINT("dialog.charflip_negatives", dialog.hard.charflip_negatives),
      GN_DOUBLE("dialog.charflip_prob", dialog.hard.charflip_prob),
      Field{"dialog.kb_flip_relations", [](const RunConfig& c) { return join(c.dialog.augment.kb_flip_relations, ' '); },
            [](RunConfig& c, const std::string& v) { c.dialog.augment.kb_flip_relations = to_words(v); }},
      GN_DOUBLE("dialog.kb_flip_prob", dialog.augment.kb_flip_prob),
      GN_BOOL("dialog.geometric", dialog.geometric),
      GN_UINT("dialog.instance_seed", dialog.instance_seed),

      GN_STRING("paths.font", paths.font),
      GN_STRING("paths.train", paths.train),
      GN_STRING("paths.val", paths.val),
      GN_STRING("paths.test", paths.test),
      GN_STRING("paths.candidates", paths.candidates),
  };
  return table;
}

#undef GN_UINT
#undef GN_DOUBLE
#undef GN_BOOL
#undef GN_STRING

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  try {
    f->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

void parse_run_config(std::istream& in, RunConfig& config) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'section.key = value'", line_no);
    const std::string key = trim(body.substr(0, eq));
    try {
      set_config_value(config, key, trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

void load_run_config(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  parse_run_config(in, config);
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

bool apply_seed_override(RunConfig& config) {
  const char* env = std::getenv("GLYPHNET_SEED");
  if (!env || !*env) return false;
  std::uint64_t seed = 0;
  try {
    seed = to_uint(env);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("GLYPHNET_SEED: ") + e.what());
  }
  config.model.seed = seed;
  config.train.shuffle_seed = seed;
  config.augment.rng_seed = seed;
  config.dialog.instance_seed = seed;
  return true;
}

}  // namespace glyphnet
