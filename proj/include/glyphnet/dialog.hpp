#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glyphnet/augment.hpp"
#include "glyphnet/datasets.hpp"
#include "glyphnet/font.hpp"
#include "glyphnet/model.hpp"
#include "glyphnet/raster.hpp"
#include "glyphnet/trainer.hpp"

namespace glyphnet {

/// Everything the system knows before it answers: KB facts seen so far, the
/// earlier turns, and the current user utterance (last entry of `turns`).
struct DialogHistory {
  std::vector<std::string> kb_facts;
  std::vector<std::string> turns;

  /// KB facts, then turns, one per line.
  std::string text() const;
  bool empty() const noexcept { return kb_facts.empty() && turns.empty(); }
  bool operator==(const DialogHistory&) const = default;
};

struct ScoringInstance {
  DialogHistory history;
  std::string candidate;
  bool correct = false;
  std::size_t dialog_id = 0;
  /// Index of the system turn within its dialog.
  std::size_t turn = 0;
};

/// The history in front of every system turn, paired with the gold response.
std::vector<std::pair<DialogHistory, std::string>> system_turns(const Dialogue& dialog);

struct HardNegativeConfig {
  /// Bias candidate negatives toward small edit distance from the gold response.
  bool enabled = true;
  /// Share of candidate negatives drawn from the `pool` nearest candidates.
  double hard_fraction = 0.5;
  std::size_t pool = 8;
  /// Extra negatives per positive made by char-flipping the gold response.
  std::size_t charflip_negatives = 1;
  double charflip_prob = 0.5;
  std::vector<std::string> charflip_classes{"0123456789"};

  void validate() const;
  /// Uniform negatives only, no flipped responses.
  static HardNegativeConfig off();
};

/// Character-level Levenshtein distance over code points.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// One positive plus `negatives_per_positive` candidate negatives per system
/// turn, followed by `charflip_negatives` flipped copies of the gold response
/// when hard negatives are enabled. A gold response with nothing to flip gets
/// candidate negatives instead, so the ratio is always exact. Throws
/// ConfigError when a gold response is missing from `candidates` or there are
/// too few other candidates.
std::vector<ScoringInstance> build_instances(const std::vector<Dialogue>& dialogs, const CandidateSet& candidates,
                                             std::size_t negatives_per_positive, const HardNegativeConfig& hard,
                                             std::uint64_t seed);

/// Page geometry for (history, candidate) pairs: history rows at the top,
/// a one-pixel separator rule, candidate rows at the bottom.
struct PairLayout {
  LayoutConfig page{};
  std::size_t candidate_rows = 1;

  /// 256x96, margin 4: four history rows over one candidate row.
  static PairLayout defaults();
  void validate(const GlyphFont& font) const;
  std::size_t history_rows(const GlyphFont& font) const;
  /// Top pixel row of the candidate region.
  std::size_t candidate_top(const GlyphFont& font) const;
  /// Pixel row of the separator rule.
  std::size_t separator_y(const GlyphFont& font) const;
};

/// Renders a pair. KB facts are pinned at the top; turns fill the remaining
/// history rows and the oldest are dropped first, so the newest turn is always
/// shown. Throws OverflowError when the candidate needs more than
/// `candidate_rows` rows, ConfigError when both parts are empty.
PageImage render_pair(const DialogHistory& history, std::string_view candidate, const GlyphFont& font,
                      const PairLayout& layout);

/// Training-time augmentation of scoring pairs.
struct DialogAugment {
  bool enabled = true;
  /// Char flip applied to the value of KB facts whose relation is listed
  /// (the restaurant-rating case); the candidate is never altered.
  std::vector<std::string> kb_flip_relations{"R_rating"};
  double kb_flip_prob = 0.5;
  std::vector<std::string> charflip_classes{"0123456789"};
  /// Geometric transforms of the whole page; off unless configured.
  AugmentConfig geometric = AugmentConfig::disabled();
};

/// ScoringInstances as a binary example source (label 1 = correct).
class PairSource : public ExampleSource {
 public:
  PairSource(std::vector<ScoringInstance> instances, const GlyphFont& font, PairLayout layout,
             DialogAugment augment = {});
  std::size_t size() const override { return instances_.size(); }
  std::size_t label(std::size_t index) const override { return instances_.at(index).correct ? 1 : 0; }
  PageImage render(std::size_t index, Rng* rng) const override;

 private:
  std::vector<ScoringInstance> instances_;
  const GlyphFont* font_;
  PairLayout layout_;
  DialogAugment augment_;
};

/// Candidates by descending score; equal scores fall back to ascending text.
std::vector<std::pair<std::string, double>> rank_candidates(const std::vector<std::string>& candidates,
                                                            const std::vector<double>& scores);

/// sigmoid(logit) of every rendered (history, candidate) pair, ranked. Throws
/// ConfigError for an empty candidate list or a model with more than one output.
std::vector<std::pair<std::string, double>> score_candidates(const Model& model, const DialogHistory& history,
                                                             const std::vector<std::string>& candidates,
                                                             const GlyphFont& font, const PairLayout& layout,
                                                             std::size_t workers = 1);

struct DialogEvalReport {
  double per_response_accuracy = 0.0;
  double per_dialog_accuracy = 0.0;
  std::size_t turns = 0;
  std::size_t correct_turns = 0;
  std::size_t dialogs = 0;
  std::size_t correct_dialogs = 0;
  double seconds = 0.0;

  /// Aligned two-row metric table.
  std::string table() const;
  /// key=value lines.
  std::string key_values() const;
};

/// Scores for `candidates` given a history, one per candidate.
using PairScorer = std::function<std::vector<double>(const DialogHistory&, const std::vector<std::string>&)>;

/// A turn is correct when the top-ranked candidate equals the gold response;
/// a dialog is correct when all of its turns are.
DialogEvalReport evaluate_dialogs(const PairScorer& scorer, const std::vector<Dialogue>& dialogs,
                                  const CandidateSet& candidates);
DialogEvalReport evaluate_dialogs(const Model& model, const std::vector<Dialogue>& dialogs,
                                  const CandidateSet& candidates, const GlyphFont& font, const PairLayout& layout,
                                  std::size_t workers = 1);

}  // namespace glyphnet
