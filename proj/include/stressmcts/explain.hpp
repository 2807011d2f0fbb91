#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "stressmcts/corpus.hpp"
#include "stressmcts/models.hpp"

namespace stressmcts {

// Contiguous run of display tokens [start, start + length).
struct PhraseSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  friend auto operator<=>(const PhraseSpan&, const PhraseSpan&) = default;
};

using SpanList = std::vector<PhraseSpan>;

// A set of non-overlapping phrases over one document, kept sorted by start.
// The document must outlive the explanation.
class Explanation {
 public:
  // Sorts `spans`; throws InvalidArgument on out-of-range, empty or
  // overlapping spans.
  Explanation(const Document& doc, SpanList spans);

  // The single phrase covering the whole text.
  static Explanation root(const Document& doc);

  const Document& doc() const { return *doc_; }
  const SpanList& spans() const { return spans_; }
  std::size_t token_count() const;

  friend bool operator==(const Explanation& a, const Explanation& b) {
    return a.doc_ == b.doc_ && a.spans_ == b.spans_;
  }

 private:
  const Document* doc_;
  SpanList spans_;
};

struct Constraints {
  std::size_t n_phrases_max = 3;
  std::size_t n_length_min = 5;
  double r_min = 0.2;
  double r_max = 0.5;

  void validate() const;
};

enum class Violation { phrase_count, phrase_length, coverage_low, coverage_high };
std::string_view to_string(Violation v);

// I = -1 selects context-dependent explanations, I = +1 context-independent.
enum class Direction : int { dependent = -1, independent = 1 };
std::string_view to_string(Direction d);

struct RewardConfig {
  double alpha = 10.0;
  Direction direction = Direction::dependent;
  std::shared_ptr<const ProbModel> stress_model;
  std::shared_ptr<const ProbModel> context_model;

  void validate() const;
};

std::string phrase_text(const Document& doc, PhraseSpan span);
double proportion_r(const Explanation& expl);
double proportion_r(std::span<const PhraseSpan> spans, std::size_t doc_tokens);
std::vector<Violation> check_constraints(const Explanation& expl, const Constraints& c);
std::vector<Violation> check_constraints(std::span<const PhraseSpan> spans, std::size_t doc_tokens,
                                         const Constraints& c);

// Uncached scoring; every phrase is sent through the model.
double stress_S(const Explanation& expl, const ProbModel& stress_model);
double entropy_H(const Explanation& expl, const ProbModel& context_model);
double reward_R(const Explanation& expl, const RewardConfig& cfg);

struct ExplanationScores {
  double S = 0.0;
  double H = 0.0;
  double R = 0.0;
  double r = 0.0;
};

// Scores explanations of one document, memoizing each phrase's stress
// probability and context entropy. Not thread-safe; use one per search.
class ExplanationScorer {
 public:
  ExplanationScorer(const Document& doc, const RewardConfig& cfg);

  ExplanationScores score(std::span<const PhraseSpan> spans);
  double reward(std::span<const PhraseSpan> spans) { return score(spans).R; }

  const Document& doc() const { return *doc_; }
  const RewardConfig& config() const { return cfg_; }
  std::uint64_t cache_hits() const { return hits_; }
  std::uint64_t cache_misses() const { return misses_; }

 private:
  struct PhraseScore {
    double stress;
    double entropy;
  };
  const PhraseScore& phrase(PhraseSpan span);

  const Document* doc_;
  RewardConfig cfg_;
  std::size_t stress_index_;
  std::unordered_map<std::uint64_t, PhraseScore> cache_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

nlohmann::json explanation_json(const Explanation& expl, const ExplanationScores& scores);

enum class RenderStyle { plain, ansi, html };
// Whole text with the explanation's phrases highlighted.
std::string render_explanation(const Explanation& expl, RenderStyle style);

}  // namespace stressmcts
