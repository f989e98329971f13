#include "glyphnet/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "glyphnet/error.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

std::vector<std::string> Dialogue::kb_facts() const {
  std::vector<std::string> out;
  for (const auto& t : turns) out.insert(out.end(), t.kb_facts.begin(), t.kb_facts.end());
  return out;
}

std::size_t Dialogue::system_turn_count() const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [](const DialogTurn& t) { return t.speaker == Speaker::system; }));
}

bool CandidateSet::contains(const std::string& response) const {
  return std::find(candidates.begin(), candidates.end(), response) != candidates.end();
}

void CandidateSet::add(const std::string& response) {
  if (!contains(response)) candidates.push_back(response);
}

namespace {

std::string read_all(std::istream& in) {
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
std::vector<CsvRecord> read_csv_records(const std::string& data) {
  std::vector<CsvRecord> records;
  std::size_t i = 0, line = 1;
  while (i < data.size()) {
    if (data[i] == '\n' || data[i] == '\r') {
      if (data[i] == '\n') ++line;
      ++i;
      continue;
    }
    CsvRecord rec;
    rec.line = line;
    while (true) {
      std::string field;
      if (i < data.size() && data[i] == '"') {
        ++i;
        bool closed = false;
        while (i < data.size()) {
          if (data[i] == '"') {
            if (i + 1 < data.size() && data[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          if (data[i] == '\n') ++line;
          field.push_back(data[i++]);
        }
        if (!closed) throw ParseError("unterminated quoted field", rec.line);
        while (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r') {
          if (data[i] != ' ') throw ParseError("text after closing quote", rec.line);
          ++i;
        }
      } else {
        while (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r') field.push_back(data[i++]);
      }
      rec.fields.push_back(std::move(field));
      if (i < data.size() && data[i] == ',') {
        ++i;
        continue;
      }
      break;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string unescape_newlines(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out.push_back(' ');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') {
      out += "\"\"";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out.push_back(c);
    }
  }
  return out + "\"";
}

}  // namespace

std::vector<LabeledText> parse_csv_corpus(std::istream& in, std::size_t num_classes,
                                          std::vector<std::string>* warnings) {
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  const auto records = read_csv_records(read_all(in));
  std::vector<LabeledText> corpus;
  if (records.empty()) {
    if (warnings) warnings->push_back("CSV corpus is empty");
    return corpus;
  }
  const std::size_t columns = records.front().fields.size();
  if (columns < 2) throw ParseError("expected a label column and at least one text column", records.front().line);
  corpus.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (rec.fields.size() != columns) {
      throw ParseError(where + ": " + std::to_string(rec.fields.size()) + " columns, expected " +
                           std::to_string(columns),
                       rec.line);
    }
    const std::string& raw = rec.fields[0];
    std::size_t label = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), label);
    if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
      throw ParseError(where + ": label '" + raw + "' is not a class number", rec.line);
    }
    if (label < 1 || label > num_classes) {
      throw ParseError(where + ": label " + raw + " outside 1.." + std::to_string(num_classes), rec.line);
    }
    std::string text;
    for (std::size_t c = 1; c < rec.fields.size(); ++c) {
      const std::string part = unescape_newlines(rec.fields[c]);
      if (part.empty()) continue;
      if (!text.empty()) text += ". ";
      text += part;
    }
    if (text.empty()) throw ParseError(where + ": empty text", rec.line);
    corpus.push_back({label - 1, std::move(text)});
  }
  return corpus;
}

std::vector<LabeledText> load_csv_corpus(const std::filesystem::path& path, std::size_t num_classes,
                                         std::vector<std::string>* warnings) {
  auto in = open_input(path);
  return parse_csv_corpus(in, num_classes, warnings);
}

std::string serialize_csv_corpus(const std::vector<LabeledText>& corpus) {
  std::string out;
  for (const auto& item : corpus) {
    out += csv_quote(std::to_string(item.label + 1)) + "," + csv_quote(item.text) + "\n";
  }
  return out;
}

void write_csv_corpus(const std::filesystem::path& path, const std::vector<LabeledText>& corpus) {
  auto out = open_output(path);
  out << serialize_csv_corpus(corpus);
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

BabiCorpus parse_babi_dialogs(std::istream& in) {
  BabiCorpus corpus;
  Dialogue current;
  std::vector<std::string> pending_kb;
  std::size_t prev_number = 0;
  std::size_t line_no = 0;
  std::size_t last_content_line = 0;

  auto finish = [&] {
    if (!pending_kb.empty()) throw ParseError("knowledge-base facts not followed by a turn", last_content_line);
    if (!current.turns.empty()) {
      current.id = corpus.dialogs.size();
      corpus.dialogs.push_back(std::move(current));
    }
    current = Dialogue{};
    prev_number = 0;
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      finish();
      continue;
    }
    last_content_line = line_no;
    const std::size_t space = line.find(' ');
    std::size_t number = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + std::min(space, line.size()), number);
    if (space == std::string::npos || ec != std::errc{} || ptr != line.data() + space || number == 0) {
      throw ParseError("line must start with '<n> '", line_no);
    }
    if (number == 1 && prev_number != 0) finish();
    if (number != prev_number + 1) {
      throw ParseError("line number " + std::to_string(number) + " does not follow " + std::to_string(prev_number),
                       line_no);
    }
    prev_number = number;
    const std::string body = line.substr(space + 1);
    const std::size_t tab = body.find('\t');
    if (tab == std::string::npos) {
      if (split_ws(body).size() != 3) {
        throw ParseError("line without a tab is not a '<entity> <relation> <value>' fact", line_no);
      }
      pending_kb.push_back(body);
      continue;
    }
    std::string user = body.substr(0, tab);
    std::string system = body.substr(tab + 1);
    if (user.empty() || system.empty()) throw ParseError("empty utterance", line_no);
    current.turns.push_back({Speaker::user, std::move(user), std::move(pending_kb)});
    pending_kb.clear();
    corpus.candidates.add(system);
    current.turns.push_back({Speaker::system, std::move(system), {}});
  }
  finish();
  return corpus;
}

BabiCorpus load_babi_dialogs(const std::filesystem::path& path, const std::filesystem::path& candidates_path) {
  auto in = open_input(path);
  BabiCorpus corpus = parse_babi_dialogs(in);
  if (!candidates_path.empty()) corpus.candidates = load_candidates(candidates_path);
  return corpus;
}

std::string serialize_babi_dialogs(const std::vector<Dialogue>& dialogs) {
  std::string out;
  for (const auto& d : dialogs) {
    std::size_t n = 1;
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const auto& turn = d.turns[t];
      if (turn.speaker != Speaker::user) continue;
      for (const auto& fact : turn.kb_facts) out += std::to_string(n++) + " " + fact + "\n";
      const std::string system =
          t + 1 < d.turns.size() && d.turns[t + 1].speaker == Speaker::system ? d.turns[t + 1].utterance : "";
      out += std::to_string(n++) + " " + turn.utterance + "\t" + system + "\n";
    }
    out += "\n";
  }
  return out;
}

void write_babi_dialogs(const std::filesystem::path& path, const std::vector<Dialogue>& dialogs) {
  auto out = open_output(path);
  out << serialize_babi_dialogs(dialogs);
}

CandidateSet parse_candidates(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  const bool indexed = !lines.empty() && std::all_of(lines.begin(), lines.end(), [](const std::string& l) {
    const std::size_t sp = l.find(' ');
    return sp != std::string::npos && sp > 0 &&
           std::all_of(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(sp), [](char c) { return c >= '0' && c <= '9'; });
  });
  CandidateSet set;
  for (auto& l : lines) set.add(indexed ? l.substr(l.find(' ') + 1) : l);
  return set;
}

CandidateSet load_candidates(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_candidates(in);
}

void write_candidates(const std::filesystem::path& path, const CandidateSet& candidates) {
  auto out = open_output(path);
  for (const auto& c : candidates.candidates) out << "1 " << c << "\n";
}

// --- synthetic ---------------------------------------------------------------

namespace {

const std::vector<std::vector<std::string>>& class_vocabularies() {
  static const std::vector<std::vector<std::string>> vocab = {
      {"football", "goal", "coach", "league", "stadium"},
      {"market", "profit", "shares", "bank", "investor"},
      {"laser", "physics", "robot", "quantum", "genome"},
      {"election", "embassy", "treaty", "minister", "border"},
      {"guitar", "concert", "album", "melody", "drummer"},
      {"pizza", "recipe", "bakery", "noodle", "dessert"},
      {"airport", "hotel", "cruise", "luggage", "passport"},
      {"storm", "rainfall", "blizzard", "thunder", "humidity"},
  };
  return vocab;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

// `words` with `keywords` inserted at random positions. Trailing filler is
// dropped until the text fits in `max_chars`.
std::string compose(std::vector<std::string> words, const std::vector<std::string>& keywords, Rng& rng,
                    std::size_t max_chars) {
  const std::size_t filler = words.size();
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < keywords.size(); ++i)
    slots.push_back(std::uniform_int_distribution<std::size_t>(0, filler + i)(rng));
  while (true) {
    std::vector<std::string> out = words;
    for (std::size_t i = 0; i < keywords.size(); ++i) {
      const auto pos = std::min(slots[i], out.size());
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), keywords[i]);
    }
    std::string text = join_words(out);
    if (text.size() <= max_chars || words.empty()) return text;
    words.pop_back();
  }
}

constexpr std::size_t kMaxSyntheticChars = 72;

}  // namespace

std::size_t synthetic_class_limit() { return class_vocabularies().size(); }

const std::vector<std::string>& synthetic_keywords(std::size_t label, std::size_t num_classes) {
  if (num_classes < 2 || num_classes > synthetic_class_limit() || label >= num_classes) {
    throw ConfigError("synthetic corpus supports 2.." + std::to_string(synthetic_class_limit()) + " classes");
  }
  return class_vocabularies()[label];
}

const std::vector<std::string>& synthetic_filler_words() {
  static const std::vector<std::string> words = {
      "the",  "a",     "new",   "report", "today", "said",   "people", "after",  "week",
      "city", "local", "news",  "from",   "about", "story",  "update", "many",   "during",
      "while", "again", "early", "later", "small", "group",  "recent", "public", "several",
      "also", "more",  "than",  "with",   "into",  "over",   "this",   "it",     "is",
  };
  return words;
}

std::vector<LabeledText> generate_synthetic_classification(std::size_t num_classes, std::size_t samples_per_class,
                                                           std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("synthetic classification needs at least two classes");
  if (num_classes > synthetic_class_limit()) {
    throw ConfigError("synthetic classification supports at most " + std::to_string(synthetic_class_limit()) +
                      " classes");
  }
  std::vector<LabeledText> out;
  out.reserve(num_classes * samples_per_class);
  for (std::size_t label = 0; label < num_classes; ++label) {
    const auto& vocab = synthetic_keywords(label, num_classes);
    for (std::size_t i = 0; i < samples_per_class; ++i) {
      Rng rng = derive_rng(seed, {label, i});
      // Template: a leading keyword, then filler with a second keyword mixed in.
      const std::string lead = pick(vocab, rng);
      const std::vector<std::string> keys{pick(vocab, rng)};
      std::vector<std::string> filler(std::uniform_int_distribution<std::size_t>(2, 4)(rng));
      for (auto& w : filler) w = pick(synthetic_filler_words(), rng);
      out.push_back({label, lead + " " + compose(filler, keys, rng, kMaxSyntheticChars - lead.size() - 1)});
    }
  }
  return out;
}

const std::vector<std::string>& sentiment_words(bool positive) {
  static const std::vector<std::string> pos = {"excellent", "great", "love", "perfect", "amazing"};
  static const std::vector<std::string> neg = {"terrible", "awful", "horrible", "broken", "worst"};
  return positive ? pos : neg;
}

std::vector<LabeledText> generate_synthetic_sentiment(std::size_t samples_per_class, double neutral_fraction,
                                                      std::uint64_t seed) {
  if (!(neutral_fraction >= 0.0 && neutral_fraction < 1.0)) {
    throw ConfigError("neutral_fraction must lie in [0, 1)");
  }
  static const std::vector<std::string> filler = {"this", "product", "is", "it", "i", "the", "item", "was",
                                                  "my",   "order",   "a",  "and", "very", "really", "so", "bought"};
  auto contains_sentiment = [](const std::string& w) {
    for (bool positive : {true, false})
      for (const auto& k : sentiment_words(positive))
        if (w.find(k) != std::string::npos) return true;
    return false;
  };
  // A quarter of the filler slots hold random lowercase pseudo-words.
  auto filler_words = [&](std::size_t n, Rng& rng) {
    std::vector<std::string> words;
    while (words.size() < n) {
      if (std::bernoulli_distribution(0.25)(rng)) {
        std::string w(std::uniform_int_distribution<std::size_t>(3, 6)(rng), 'a');
        for (auto& ch : w) ch = static_cast<char>('a' + std::uniform_int_distribution<int>(0, 25)(rng));
        if (!contains_sentiment(w)) words.push_back(w);
      } else {
        words.push_back(pick(filler, rng));
      }
    }
    return words;
  };
  const auto neutral = static_cast<std::size_t>(std::llround(neutral_fraction * static_cast<double>(samples_per_class)));
  std::vector<LabeledText> out;
  out.reserve(2 * samples_per_class);
  for (std::size_t label = 0; label < 2; ++label) {
    const auto& vocab = sentiment_words(label == 1);
    for (std::size_t i = 0; i < samples_per_class; ++i) {
      // Neutral text i is drawn from a label-independent stream, so each one
      // appears once under either label.
      Rng rng = i < neutral ? derive_rng(seed, {2, i}) : derive_rng(seed, {label, i});
      std::vector<std::string> keys;
      if (i >= neutral) {
        keys.push_back(pick(vocab, rng));
        if (std::bernoulli_distribution(0.5)(rng)) keys.push_back(pick(vocab, rng));
      }
      const std::size_t n = std::uniform_int_distribution<std::size_t>(3, 6)(rng);
      out.push_back({label, compose(filler_words(n, rng), keys, rng, kMaxSyntheticChars)});
    }
  }
  return out;
}

SyntheticRestaurant synthetic_restaurant(std::size_t index, int rating) {
  char name[32];
  std::snprintf(name, sizeof name, "r_%02zu", index + 1);
  const std::string n(name);
  return {n, n + "_phone", n + "_address", rating};
}

std::string synthetic_response(const SyntheticRestaurant& r, bool phone) {
  return "here it is " + (phone ? r.phone : r.address);
}

BabiCorpus generate_synthetic_dialogs(std::size_t num_dialogs, std::size_t num_restaurants, std::uint64_t seed) {
  if (num_restaurants < 2) throw ConfigError("synthetic dialogs need at least two restaurants");
  if (num_restaurants > 99) throw ConfigError("synthetic dialogs support at most 99 restaurants");
  BabiCorpus corpus;
  for (std::size_t r = 0; r < num_restaurants; ++r) {
    const auto rest = synthetic_restaurant(r, 1);
    corpus.candidates.add(synthetic_response(rest, true));
    corpus.candidates.add(synthetic_response(rest, false));
  }
  for (std::size_t d = 0; d < num_dialogs; ++d) {
    Rng rng = derive_rng(seed, {d});
    const auto idx = std::uniform_int_distribution<std::size_t>(0, num_restaurants - 1)(rng);
    const int rating = std::uniform_int_distribution<int>(1, 8)(rng);
    const auto rest = synthetic_restaurant(idx, rating);
    Dialogue dialog;
    dialog.id = d;
    for (int request = 0; request < 2; ++request) {
      const bool phone = std::bernoulli_distribution(0.5)(rng);
      DialogTurn user{Speaker::user, phone ? "may i have the phone number" : "may i have the address", {}};
      if (request == 0) {
        user.kb_facts = {rest.name + " R_phone " + rest.phone, rest.name + " R_address " + rest.address,
                         rest.name + " R_rating " + std::to_string(rating)};
      }
      dialog.turns.push_back(std::move(user));
      dialog.turns.push_back({Speaker::system, synthetic_response(rest, phone), {}});
    }
    corpus.dialogs.push_back(std::move(dialog));
  }
  return corpus;
}

// --- splits ------------------------------------------------------------------

namespace {

std::array<std::size_t, 3> partition_counts(std::size_t n, const std::array<double, 3>& f) {
  for (const double x : f) {
    if (!(x >= 0.0)) throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const auto train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(f[0] * static_cast<double>(n))));
  const auto val =
      std::min<std::size_t>(n - train, static_cast<std::size_t>(std::llround(f[1] * static_cast<double>(n))));
  return {train, val, n - train - val};
}

template <typename T>
void distribute(std::vector<T> items, const std::array<double, 3>& fractions, Rng& rng, Split<T>& out) {
  std::shuffle(items.begin(), items.end(), rng);
  const auto counts = partition_counts(items.size(), fractions);
  auto it = items.begin();
  out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(counts[0]));
  it += static_cast<std::ptrdiff_t>(counts[0]);
  out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(counts[1]));
  it += static_cast<std::ptrdiff_t>(counts[1]);
  out.test.insert(out.test.end(), it, items.end());
}

}  // namespace

Split<LabeledText> split_dataset(const std::vector<LabeledText>& data, std::array<double, 3> fractions,
                                 std::uint64_t seed) {
  partition_counts(0, fractions);
  std::map<std::size_t, std::vector<LabeledText>> by_class;
  for (const auto& item : data) by_class[item.label].push_back(item);
  Split<LabeledText> out;
  Rng rng = derive_rng(seed, {0x5011u});
  for (auto& [label, items] : by_class) distribute(std::move(items), fractions, rng, out);
  std::shuffle(out.train.begin(), out.train.end(), rng);
  std::shuffle(out.val.begin(), out.val.end(), rng);
  std::shuffle(out.test.begin(), out.test.end(), rng);
  return out;
}

Split<Dialogue> split_dataset(const std::vector<Dialogue>& data, std::array<double, 3> fractions, std::uint64_t seed) {
  Split<Dialogue> out;
  Rng rng = derive_rng(seed, {0x5011u});
  distribute(data, fractions, rng, out);
  return out;
}

}  // namespace glyphnet
