#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace glyphnet {

struct LabeledText {
  std::size_t label = 0;  // 0-based
  std::string text;
  bool operator==(const LabeledText&) const = default;
};

enum class Speaker { user, system };

struct DialogTurn {
  Speaker speaker = Speaker::user;
  std::string utterance;
  /// Knowledge-base lines (without their line numbers) that precede this turn.
  std::vector<std::string> kb_facts;
  bool operator==(const DialogTurn&) const = default;
};

struct Dialogue {
  std::size_t id = 0;
  /// Alternates user, system, user, system, ...
  std::vector<DialogTurn> turns;

  /// Every KB fact attached anywhere in the dialog, in file order.
  std::vector<std::string> kb_facts() const;
  std::size_t system_turn_count() const;
  bool operator==(const Dialogue&) const = default;
};

/// Unique response strings in first-seen order.
struct CandidateSet {
  std::vector<std::string> candidates;

  bool contains(const std::string& response) const;
  /// Appends unless already present.
  void add(const std::string& response);
  std::size_t size() const noexcept { return candidates.size(); }
};

// --- Zhang-style CSV -------------------------------------------------------
//
// Every record is a list of quoted fields: "<class>","<field>",... with the
// class 1-based. Text fields are joined with ". " (empty ones skipped) and the
// two-character escape \n becomes a space. No other normalization happens.

/// Throws ParseError (carrying the record number) for a bad column count,
/// a non-numeric or out-of-range label, or an empty text. An empty input
/// yields an empty corpus plus a warning.
std::vector<LabeledText> parse_csv_corpus(std::istream& in, std::size_t num_classes,
                                          std::vector<std::string>* warnings = nullptr);
std::vector<LabeledText> load_csv_corpus(const std::filesystem::path& path, std::size_t num_classes,
                                         std::vector<std::string>* warnings = nullptr);
/// Writes "<label+1>","<text>" records.
std::string serialize_csv_corpus(const std::vector<LabeledText>& corpus);
void write_csv_corpus(const std::filesystem::path& path, const std::vector<LabeledText>& corpus);

// --- bAbI dialog format ------------------------------------------------------
//
//   <n> <user utterance>\t<system utterance>
//   <n> <entity> <relation> <value>            (KB fact, no tab)
//
// Blank lines separate dialogs; numbering restarts at 1 for each dialog.

struct BabiCorpus {
  std::vector<Dialogue> dialogs;
  CandidateSet candidates;
};

/// Throws ParseError with the line number for non-consecutive numbering or a
/// tab-less line that is not a KB triple. Candidates are the distinct system
/// utterances in file order.
BabiCorpus parse_babi_dialogs(std::istream& in);
/// When `candidates_path` is non-empty the candidate set is read from it
/// instead of being collected from the dialogs.
BabiCorpus load_babi_dialogs(const std::filesystem::path& path, const std::filesystem::path& candidates_path = {});
std::string serialize_babi_dialogs(const std::vector<Dialogue>& dialogs);
void write_babi_dialogs(const std::filesystem::path& path, const std::vector<Dialogue>& dialogs);

/// One response per line; a leading "<n> " index (as in the public candidates
/// file) is stripped when every line carries one.
CandidateSet parse_candidates(std::istream& in);
CandidateSet load_candidates(const std::filesystem::path& path);
/// Writes "1 <response>" lines, the public candidates-file layout.
void write_candidates(const std::filesystem::path& path, const CandidateSet& candidates);

// --- synthetic corpora -------------------------------------------------------

/// Keyword vocabulary that signals `label` in generate_synthetic_classification.
const std::vector<std::string>& synthetic_keywords(std::size_t label, std::size_t num_classes);
/// Words shared by every class; none contains any keyword as a substring.
const std::vector<std::string>& synthetic_filler_words();

/// Template sentences that open with a class keyword, followed by filler with
/// a second keyword mixed in. The opening word alone separates the classes in
/// pixel space. Samples are grouped by class. Throws ConfigError for num_classes < 2 or more classes than
/// vocabularies.
std::vector<LabeledText> generate_synthetic_classification(std::size_t num_classes, std::size_t samples_per_class,
                                                           std::uint64_t seed);

/// Maximum number of classes generate_synthetic_classification supports.
std::size_t synthetic_class_limit();

/// Binary sentiment corpus: label 1 samples carry positive words, label 0
/// negative words. A `neutral_fraction` of each class carries no sentiment
/// word at all. Each neutral text appears once under either label, so
/// keyword-free text carries no label information. Filler mixes a fixed word
/// list with random pseudo-words.
std::vector<LabeledText> generate_synthetic_sentiment(std::size_t samples_per_class, double neutral_fraction,
                                                      std::uint64_t seed);
const std::vector<std::string>& sentiment_words(bool positive);

struct SyntheticRestaurant {
  std::string name;
  std::string phone;
  std::string address;
  int rating = 1;
};

/// Restaurant `index` of a synthetic KB (0-based): name r_XX, delexicalized
/// phone/address tokens.
SyntheticRestaurant synthetic_restaurant(std::size_t index, int rating);

/// Task-4 style dialogs: a KB block for one restaurant (phone, address,
/// rating 1..8) followed by two user requests for its phone or address. The
/// candidate set holds both responses for every restaurant.
BabiCorpus generate_synthetic_dialogs(std::size_t num_dialogs, std::size_t num_restaurants, std::uint64_t seed);

/// Gold system response to a phone/address request.
std::string synthetic_response(const SyntheticRestaurant& r, bool phone);

// --- splits ------------------------------------------------------------------

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

/// Seeded shuffle then partition by `fractions` (train, val, test), which must
/// sum to 1 within 1e-9. Labeled text is stratified per class.
Split<LabeledText> split_dataset(const std::vector<LabeledText>& data, std::array<double, 3> fractions,
                                 std::uint64_t seed);
Split<Dialogue> split_dataset(const std::vector<Dialogue>& data, std::array<double, 3> fractions, std::uint64_t seed);

}  // namespace glyphnet
