#include "glyphnet/dialog.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "glyphnet/error.hpp"
#include "glyphnet/layers.hpp"

namespace glyphnet {

std::string DialogHistory::text() const {
  std::string out;
  for (const auto& f : kb_facts) out += f + "\n";
  for (const auto& t : turns) out += t + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

std::vector<std::pair<DialogHistory, std::string>> system_turns(const Dialogue& dialog) {
  std::vector<std::pair<DialogHistory, std::string>> out;
  DialogHistory history;
  for (const auto& turn : dialog.turns) {
    history.kb_facts.insert(history.kb_facts.end(), turn.kb_facts.begin(), turn.kb_facts.end());
    if (turn.speaker == Speaker::system) out.emplace_back(history, turn.utterance);
    history.turns.push_back(turn.utterance);
  }
  return out;
}

void HardNegativeConfig::validate() const {
  if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) throw ConfigError("dialog.hard_fraction must lie in [0, 1]");
  if (!(charflip_prob > 0.0 && charflip_prob <= 1.0)) throw ConfigError("dialog.charflip_prob must lie in (0, 1]");
  if (enabled && hard_fraction > 0.0 && pool == 0) throw ConfigError("dialog.hard_pool must be positive");
  for (const auto& cls : charflip_classes) {
    if (decode_utf8(cls).size() < 2) throw ConfigError("char flip class '" + cls + "' needs at least two members");
  }
}

HardNegativeConfig HardNegativeConfig::off() {
  HardNegativeConfig c;
  c.enabled = false;
  c.charflip_negatives = 0;
  return c;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::u32string x = decode_utf8(a), y = decode_utf8(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

std::vector<ScoringInstance> build_instances(const std::vector<Dialogue>& dialogs, const CandidateSet& candidates,
                                             std::size_t negatives_per_positive, const HardNegativeConfig& hard,
                                             std::uint64_t seed) {
  hard.validate();
  const auto& pool = candidates.candidates;
  AugmentConfig flip_cfg = AugmentConfig::disabled();
  flip_cfg.charflip_prob = hard.charflip_prob;
  flip_cfg.charflip_classes = hard.charflip_classes;
  const std::size_t flips = hard.enabled ? hard.charflip_negatives : 0;

  // Candidate indices (gold excluded) ordered by edit distance, per gold.
  using Ranked = std::vector<std::pair<std::size_t, std::size_t>>;  // (distance, index)
  std::map<std::string, Ranked> by_distance;
  auto nearest = [&](const std::string& gold) -> const Ranked& {
    auto it = by_distance.find(gold);
    if (it != by_distance.end()) return it->second;
    std::vector<std::pair<std::size_t, std::size_t>> d;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i] != gold) d.emplace_back(levenshtein(gold, pool[i]), i);
    }
    std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return by_distance.emplace(gold, std::move(d)).first->second;
  };

  std::vector<ScoringInstance> out;
  for (std::size_t di = 0; di < dialogs.size(); ++di) {
    const auto turns = system_turns(dialogs[di]);
    for (std::size_t t = 0; t < turns.size(); ++t) {
      const auto& [history, gold] = turns[t];
      if (!candidates.contains(gold)) {
        throw ConfigError("gold response '" + gold + "' of dialog " + std::to_string(dialogs[di].id) +
                          " is not in the candidate set");
      }
      Rng rng = derive_rng(seed, {di, t});
      const std::size_t id = dialogs[di].id;
      out.push_back({history, gold, true, id, t});

      std::size_t flipped = 0;
      for (std::size_t k = 0; k < flips; ++k) {
        for (int attempt = 0; attempt < 32; ++attempt) {
          std::string neg = char_flip(gold, flip_cfg, rng);
          if (neg != gold) {
            out.push_back({history, std::move(neg), false, id, t});
            ++flipped;
            break;
          }
        }
      }

      const std::size_t wanted = negatives_per_positive + (flips - flipped);
      if (pool.size() - 1 < wanted) {
        throw ConfigError("need " + std::to_string(wanted) + " negatives but only " +
                          std::to_string(pool.size() - 1) + " other candidates exist");
      }
      std::vector<std::size_t> chosen;
      std::vector<bool> used(pool.size(), false);
      if (hard.enabled && wanted > 0) {
        const auto& order = nearest(gold);
        const auto hard_n = std::min<std::size_t>(
            wanted, static_cast<std::size_t>(std::llround(hard.hard_fraction * static_cast<double>(wanted))));
        // Ties at the pool boundary are broken at random so every equally
        // close candidate can be drawn.
        const std::size_t limit = std::min(hard.pool, order.size());
        std::size_t end = limit;
        while (end > 0 && end < order.size() && order[end].first == order[limit - 1].first) ++end;
        Ranked near(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(end));
        std::shuffle(near.begin(), near.end(), rng);
        std::stable_sort(near.begin(), near.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        near.resize(limit);
        std::shuffle(near.begin(), near.end(), rng);
        for (std::size_t k = 0; k < std::min(hard_n, near.size()); ++k) {
          chosen.push_back(near[k].second);
          used[near[k].second] = true;
        }
      }
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!used[i] && pool[i] != gold) rest.push_back(i);
      }
      std::shuffle(rest.begin(), rest.end(), rng);
      for (std::size_t k = 0; chosen.size() < wanted; ++k) chosen.push_back(rest[k]);
      for (const auto idx : chosen) out.push_back({history, pool[idx], false, id, t});
    }
  }
  return out;
}

PairLayout PairLayout::defaults() {
  PairLayout l;
  l.page.width = 256;
  l.page.height = 96;
  l.page.margin = 4;
  return l;
}

std::size_t PairLayout::candidate_top(const GlyphFont& font) const {
  const std::size_t block = candidate_rows * font.cell_height() + (candidate_rows - 1) * page.line_spacing;
  if (page.height < page.margin + block) throw ConfigError("candidate region does not fit the page");
  return page.height - page.margin - block;
}

std::size_t PairLayout::separator_y(const GlyphFont& font) const {
  const std::size_t top = candidate_top(font);
  if (top < 2) throw ConfigError("no room for the separator rule");
  return top - 2;
}

std::size_t PairLayout::history_rows(const GlyphFont& font) const {
  const std::size_t sep = separator_y(font);
  const std::size_t pitch = font.cell_height() + page.line_spacing;
  if (sep < page.margin + font.cell_height()) return 0;
  return (sep - page.margin - font.cell_height()) / pitch + 1;
}

void PairLayout::validate(const GlyphFont& font) const {
  page.validate(font);
  if (candidate_rows == 0) throw ConfigError("dialog.candidate_rows must be at least 1");
  if (history_rows(font) == 0) throw ConfigError("page leaves no room for history rows");
}

PageImage render_pair(const DialogHistory& history, std::string_view candidate, const GlyphFont& font,
                      const PairLayout& layout) {
  layout.validate(font);
  if (history.empty() && candidate.empty()) throw ConfigError("nothing to render: empty history and candidate");
  const std::size_t columns = layout.page.columns(font);
  const auto cand_lines = layout_lines(decode_utf8(candidate), columns, layout.page.wrap);
  if (cand_lines.size() > layout.candidate_rows) {
    throw OverflowError("candidate needs " + std::to_string(cand_lines.size()) + " rows, region holds " +
                        std::to_string(layout.candidate_rows));
  }

  const std::size_t capacity = layout.history_rows(font);
  std::vector<std::u32string> kb;
  for (const auto& f : history.kb_facts) {
    for (auto& l : layout_lines(decode_utf8(f), columns, layout.page.wrap)) kb.push_back(std::move(l));
  }
  // Newest turns first until the next one no longer fits beside the KB block.
  std::vector<std::vector<std::u32string>> kept;
  std::size_t turn_rows = 0;
  for (std::size_t i = history.turns.size(); i-- > 0;) {
    auto lines = layout_lines(decode_utf8(history.turns[i]), columns, layout.page.wrap);
    const bool newest = i + 1 == history.turns.size();
    if (!newest && kb.size() + turn_rows + lines.size() > capacity) break;
    turn_rows += lines.size();
    kept.push_back(std::move(lines));
  }
  std::vector<std::u32string> rows;
  for (auto it = kept.rbegin(); it != kept.rend(); ++it) rows.insert(rows.end(), it->begin(), it->end());
  if (rows.size() > capacity) rows.erase(rows.begin(), rows.end() - static_cast<std::ptrdiff_t>(capacity));
  const std::size_t kb_keep = std::min(kb.size(), capacity - rows.size());
  rows.insert(rows.begin(), kb.end() - static_cast<std::ptrdiff_t>(kb_keep), kb.end());

  const LayoutConfig& page_cfg = layout.page;
  PageImage page(page_cfg.width, page_cfg.height, page_cfg.background());
  const std::size_t pitch = font.cell_height() + page_cfg.line_spacing;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    blit_line(page, rows[r], page_cfg.margin, page_cfg.margin + r * pitch, font, page_cfg.ink());
  }
  const std::size_t sep = layout.separator_y(font);
  for (std::size_t x = page_cfg.margin; x + page_cfg.margin < page_cfg.width; ++x) page.at(x, sep) = page_cfg.ink();
  const std::size_t top = layout.candidate_top(font);
  for (std::size_t r = 0; r < cand_lines.size(); ++r) {
    blit_line(page, cand_lines[r], page_cfg.margin, top + r * pitch, font, page_cfg.ink());
  }
  return page;
}

PairSource::PairSource(std::vector<ScoringInstance> instances, const GlyphFont& font, PairLayout layout,
                       DialogAugment augment)
    : instances_(std::move(instances)), font_(&font), layout_(std::move(layout)), augment_(std::move(augment)) {
  layout_.validate(font);
  augment_.geometric.validate();
  if (!(augment_.kb_flip_prob >= 0.0 && augment_.kb_flip_prob <= 1.0)) {
    throw ConfigError("dialog.kb_flip_prob must lie in [0, 1]");
  }
}

PageImage PairSource::render(std::size_t index, Rng* rng) const {
  const ScoringInstance& inst = instances_.at(index);
  if (!rng || !augment_.enabled) return render_pair(inst.history, inst.candidate, *font_, layout_);
  DialogHistory history = inst.history;
  if (augment_.kb_flip_prob > 0.0 && !augment_.kb_flip_relations.empty()) {
    AugmentConfig flip = AugmentConfig::disabled();
    flip.charflip_prob = augment_.kb_flip_prob;
    flip.charflip_classes = augment_.charflip_classes;
    for (auto& fact : history.kb_facts) {
      const std::size_t a = fact.find(' ');
      const std::size_t b = a == std::string::npos ? a : fact.find(' ', a + 1);
      if (b == std::string::npos) continue;
      const std::string relation = fact.substr(a + 1, b - a - 1);
      if (std::find(augment_.kb_flip_relations.begin(), augment_.kb_flip_relations.end(), relation) ==
          augment_.kb_flip_relations.end()) {
        continue;
      }
      fact = fact.substr(0, b + 1) + char_flip(fact.substr(b + 1), flip, *rng);
    }
  }
  PageImage page = render_pair(history, inst.candidate, *font_, layout_);
  const AugmentConfig& g = augment_.geometric;
  if (g.width_shift_frac > 0.0 || g.height_shift_frac > 0.0 || g.max_rotation_deg > 0.0 || g.hflip_prob > 0.0) {
    page = augment_page(page, layout_.page, g, *rng);
  }
  return page;
}

std::vector<std::pair<std::string, double>> rank_candidates(const std::vector<std::string>& candidates,
                                                            const std::vector<double>& scores) {
  if (candidates.size() != scores.size()) throw ShapeError("one score per candidate required");
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) ranked.emplace_back(candidates[i], scores[i]);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

namespace {

std::vector<double> model_scores(const Model& model, const DialogHistory& history,
                                 const std::vector<std::string>& candidates, const GlyphFont& font,
                                 const PairLayout& layout, std::size_t workers) {
  if (model.config().num_outputs != 1) {
    throw ConfigError("candidate scoring needs a one-output model, got " +
                      std::to_string(model.config().num_outputs) + " outputs");
  }
  std::vector<PageImage> pages(candidates.size());
  parallel_for(candidates.size(), workers,
               [&](std::size_t i) { pages[i] = render_pair(history, candidates[i], font, layout); });
  const auto probs = predict_pages(model, pages, 64, workers);
  std::vector<double> scores;
  scores.reserve(probs.size());
  for (const auto& p : probs) scores.push_back(p[0]);
  return scores;
}

}  // namespace

std::vector<std::pair<std::string, double>> score_candidates(const Model& model, const DialogHistory& history,
                                                             const std::vector<std::string>& candidates,
                                                             const GlyphFont& font, const PairLayout& layout,
                                                             std::size_t workers) {
  if (candidates.empty()) throw ConfigError("no candidates to score");
  return rank_candidates(candidates, model_scores(model, history, candidates, font, layout, workers));
}

std::string DialogEvalReport::table() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-22s %8s %12s\n", "metric", "value", "correct");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-22s %8.4f %12s\n", "per_response_accuracy", per_response_accuracy,
                (std::to_string(correct_turns) + "/" + std::to_string(turns)).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-22s %8.4f %12s\n", "per_dialog_accuracy", per_dialog_accuracy,
                (std::to_string(correct_dialogs) + "/" + std::to_string(dialogs)).c_str());
  out += buf;
  return out;
}

std::string DialogEvalReport::key_values() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", per_response_accuracy);
  out << "per_response_accuracy=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.6f", per_dialog_accuracy);
  out << "per_dialog_accuracy=" << buf << "\n";
  out << "turns=" << turns << "\ncorrect_turns=" << correct_turns << "\ndialogs=" << dialogs
      << "\ncorrect_dialogs=" << correct_dialogs << "\n";
  return out.str();
}

DialogEvalReport evaluate_dialogs(const PairScorer& scorer, const std::vector<Dialogue>& dialogs,
                                  const CandidateSet& candidates) {
  const auto start = std::chrono::steady_clock::now();
  if (candidates.size() == 0) throw ConfigError("candidate set is empty");
  DialogEvalReport r;
  for (const auto& d : dialogs) {
    const auto turns = system_turns(d);
    if (turns.empty()) continue;
    bool all = true;
    for (const auto& [history, gold] : turns) {
      const auto ranked = rank_candidates(candidates.candidates, scorer(history, candidates.candidates));
      const bool ok = ranked.front().first == gold;
      ++r.turns;
      if (ok) ++r.correct_turns;
      all = all && ok;
    }
    ++r.dialogs;
    if (all) ++r.correct_dialogs;
  }
  if (r.turns) r.per_response_accuracy = static_cast<double>(r.correct_turns) / static_cast<double>(r.turns);
  if (r.dialogs) r.per_dialog_accuracy = static_cast<double>(r.correct_dialogs) / static_cast<double>(r.dialogs);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

DialogEvalReport evaluate_dialogs(const Model& model, const std::vector<Dialogue>& dialogs,
                                  const CandidateSet& candidates, const GlyphFont& font, const PairLayout& layout,
                                  std::size_t workers) {
  const PairScorer scorer = [&](const DialogHistory& history, const std::vector<std::string>& cands) {
    return model_scores(model, history, cands, font, layout, workers);
  };
  return evaluate_dialogs(scorer, dialogs, candidates);
}

}  // namespace glyphnet
