#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "stressmcts/explain.hpp"

namespace stressmcts {

enum class ActionKind { trim_front, trim_back, split };
std::string_view to_string(ActionKind kind);

// An edit that removes exactly one token from one phrase. For splits,
// split_offset is the position (within the phrase) of the removed token.
struct Action {
  ActionKind kind = ActionKind::trim_front;
  std::size_t phrase_index = 0;
  std::size_t split_offset = 0;

  friend bool operator==(const Action&, const Action&) = default;
};

// Legal edits in canonical order: by phrase, then trim_front, trim_back,
// split (ascending offset).
std::vector<Action> legal_actions(std::span<const PhraseSpan> spans, const Constraints& c);
std::vector<Action> legal_actions(const Explanation& expl, const Constraints& c);

// Throws InvalidArgument when the action does not fit the span list (bad
// phrase index, trimming a one-token phrase, split offset not interior).
SpanList apply_action(std::span<const PhraseSpan> spans, const Action& a);
Explanation apply_action(const Explanation& expl, const Action& a);

struct SearchConfig {
  int iterations = 2000;
  double c_puct = 1.0;
  std::uint64_t seed = 0;
  Constraints constraints;
  RewardConfig reward;
  // Also offer every explanation visited during rollouts as a candidate for
  // the best explanation (tree nodes are always candidates).
  bool rollout_candidates = true;
  // Reuse one node for every action order that reaches the same span list,
  // turning the tree into a DAG.
  bool share_transpositions = true;
  // Skip exhausted subtrees during selection (their rewards are already
  // known exactly) until the whole space is exhausted.
  bool prune_exhausted = true;

  void validate() const;
};

// Which coverage window the returned explanation satisfies.
enum class CoverageWindow { full, upper_only };
std::string_view to_string(CoverageWindow w);

struct SearchStats {
  std::uint64_t simulations = 0;
  std::uint64_t nodes_materialized = 0;
  std::uint64_t nodes_expanded = 0;
  std::uint64_t rollout_steps = 0;
  std::uint64_t candidates_scored = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::size_t max_depth = 0;
};

struct SearchResult {
  Explanation best;
  ExplanationScores scores;
  CoverageWindow window = CoverageWindow::full;
  SearchStats stats;
};

// No candidate satisfied even r <= r_max.
class NoValidExplanation : public Error {
 public:
  NoValidExplanation(const std::string& what, SearchStats stats) : Error(what), stats_(stats) {}
  const SearchStats& stats() const { return stats_; }

 private:
  SearchStats stats_;
};

// A model failed while scoring; the search stopped early.
class SearchAborted : public Error {
 public:
  SearchAborted(const std::string& what, SearchStats stats) : Error(what), stats_(stats) {}
  const SearchStats& stats() const { return stats_; }

 private:
  SearchStats stats_;
};

// PUCT search tree over explanations of one document.
class SearchTree {
 public:
  SearchTree(const Document& doc, const SearchConfig& cfg);

  // Runs one select / expand / rollout / backpropagate cycle and returns the
  // reward that was backpropagated.
  double simulate();

  std::uint64_t root_visits() const { return nodes_.front().visits; }
  double root_value_sum() const { return nodes_.front().value_sum; }
  std::size_t node_count() const { return nodes_.size(); }
  SearchStats stats() const;

  // Best candidate under the full window, else under r <= r_max.
  SearchResult result() const;

 private:
  struct Node {
    SpanList spans;
    std::uint64_t visits = 0;
    double value_sum = 0.0;
    double reward = 0.0;
    bool terminal = false;
    bool expanded = false;
    // Terminal, or expanded with every child exhausted: nothing left to learn
    // below this node.
    bool exhausted = false;
    std::size_t depth = 0;
    std::size_t action_count = 0;
    std::vector<std::size_t> children;
  };

  struct Candidate {
    SpanList spans;
    ExplanationScores scores;
  };

  std::size_t materialize(SpanList spans, std::size_t depth);
  void expand(std::size_t node);
  std::size_t select_child(std::size_t node, bool skip_exhausted) const;
  void update_exhausted(std::size_t node);
  double rollout(const SpanList& start);
  bool is_terminal(std::span<const PhraseSpan> spans, std::size_t legal_count) const;
  void consider(const SpanList& spans, const ExplanationScores& scores);

  const Document* doc_;
  SearchConfig cfg_;
  ExplanationScorer scorer_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<Candidate> best_full_;
  std::optional<Candidate> best_upper_;
  SearchStats stats_;
};

SearchResult search(const Document& doc, const SearchConfig& cfg);

struct ExplanationPair {
  SearchResult dependent;
  SearchResult independent;
};

// Runs the search with I = -1 and then I = +1, same seed and constraints.
ExplanationPair explain_both(const Document& doc, const SearchConfig& cfg_base);

}  // namespace stressmcts
