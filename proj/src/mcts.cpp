#include "stressmcts/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stressmcts {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::trim_front:
      return "trim_front";
    case ActionKind::trim_back:
      return "trim_back";
    case ActionKind::split:
      return "split";
  }
  return "unknown";
}

std::string_view to_string(CoverageWindow w) { return w == CoverageWindow::full ? "full" : "upper_only"; }

std::vector<Action> legal_actions(std::span<const PhraseSpan> spans, const Constraints& c) {
  std::vector<Action> out;
  const bool can_split = spans.size() + 1 <= c.n_phrases_max;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::size_t len = spans[i].length;
    if (len > c.n_length_min) {
      out.push_back({ActionKind::trim_front, i, 0});
      out.push_back({ActionKind::trim_back, i, 0});
    }
    // Removing the token at offset o leaves o tokens on the left and
    // len - o - 1 on the right; both need n_length_min.
    if (can_split && len >= 2 * c.n_length_min + 1) {
      for (std::size_t o = c.n_length_min; o + c.n_length_min + 1 <= len; ++o) {
        out.push_back({ActionKind::split, i, o});
      }
    }
  }
  return out;
}

std::vector<Action> legal_actions(const Explanation& expl, const Constraints& c) {
  return legal_actions(expl.spans(), c);
}

SpanList apply_action(std::span<const PhraseSpan> spans, const Action& a) {
  if (a.phrase_index >= spans.size()) throw InvalidArgument("action refers to a missing phrase");
  SpanList out(spans.begin(), spans.end());
  PhraseSpan& p = out[a.phrase_index];
  switch (a.kind) {
    case ActionKind::trim_front:
      if (p.length < 2) throw InvalidArgument("cannot trim a single-token phrase");
      ++p.start;
      --p.length;
      break;
    case ActionKind::trim_back:
      if (p.length < 2) throw InvalidArgument("cannot trim a single-token phrase");
      --p.length;
      break;
    case ActionKind::split: {
      if (a.split_offset < 1 || a.split_offset + 1 >= p.length) {
        throw InvalidArgument("split offset must be interior to the phrase");
      }
      const PhraseSpan right{p.start + a.split_offset + 1, p.length - a.split_offset - 1};
      p.length = a.split_offset;
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(a.phrase_index) + 1, right);
      break;
    }
  }
  return out;
}

Explanation apply_action(const Explanation& expl, const Action& a) {
  return Explanation(expl.doc(), apply_action(expl.spans(), a));
}

void SearchConfig::validate() const {
  if (iterations < 1) throw InvalidArgument("iterations must be at least 1");
  if (!(c_puct > 0.0)) throw InvalidArgument("c_puct must be positive");
  constraints.validate();
  reward.validate();
}

SearchTree::SearchTree(const Document& doc, const SearchConfig& cfg)
    : doc_(&doc), cfg_(cfg), scorer_(doc, cfg.reward), rng_(cfg.seed) {
  cfg_.validate();
  if (doc.display_tokens.size() < cfg_.constraints.n_length_min) {
    throw InvalidArgument("document '" + doc.id + "' has fewer tokens than the minimum phrase length");
  }
  try {
    materialize({PhraseSpan{0, doc.display_tokens.size()}}, 0);
  } catch (const ModelError& e) {
    throw SearchAborted(std::string("scoring failed: ") + e.what(), stats());
  }
}

bool SearchTree::is_terminal(std::span<const PhraseSpan> spans, std::size_t legal_count) const {
  return legal_count == 0 || proportion_r(spans, doc_->display_tokens.size()) <= cfg_.constraints.r_min;
}

void SearchTree::consider(const SpanList& spans, const ExplanationScores& scores) {
  ++stats_.candidates_scored;
  const auto& c = cfg_.constraints;
  if (scores.r > c.r_max) return;
  if (!best_upper_ || scores.R > best_upper_->scores.R) best_upper_ = Candidate{spans, scores};
  if (scores.r >= c.r_min && (!best_full_ || scores.R > best_full_->scores.R)) {
    best_full_ = Candidate{spans, scores};
  }
}

namespace {

std::string span_key(std::span<const PhraseSpan> spans) {
  std::string key;
  key.reserve(spans.size() * 2 * sizeof(std::uint32_t));
  for (const auto& s : spans) {
    for (auto v : {static_cast<std::uint32_t>(s.start), static_cast<std::uint32_t>(s.length)}) {
      key.append(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  return key;
}

}  // namespace

std::size_t SearchTree::materialize(SpanList spans, std::size_t depth) {
  std::string key;
  if (cfg_.share_transpositions) {
    key = span_key(spans);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
  }
  Node node;
  node.action_count = legal_actions(spans, cfg_.constraints).size();
  node.terminal = is_terminal(spans, node.action_count);
  node.exhausted = node.terminal;
  const auto scores = scorer_.score(spans);
  node.reward = scores.R;
  node.depth = depth;
  consider(spans, scores);
  node.spans = std::move(spans);
  nodes_.push_back(std::move(node));
  if (cfg_.share_transpositions) index_.emplace(std::move(key), nodes_.size() - 1);
  ++stats_.nodes_materialized;
  stats_.max_depth = std::max(stats_.max_depth, depth);
  return nodes_.size() - 1;
}

void SearchTree::expand(std::size_t index) {
  const SpanList spans = nodes_[index].spans;
  const std::vector<Action> actions = legal_actions(spans, cfg_.constraints);
  const std::size_t depth = nodes_[index].depth + 1;
  std::vector<std::size_t> children;
  children.reserve(actions.size());
  for (const auto& a : actions) children.push_back(materialize(apply_action(spans, a), depth));
  nodes_[index].children = std::move(children);
  nodes_[index].expanded = true;
  ++stats_.nodes_expanded;
}

void SearchTree::update_exhausted(std::size_t index) {
  Node& node = nodes_[index];
  if (node.exhausted || !node.expanded) return;
  node.exhausted = std::all_of(node.children.begin(), node.children.end(),
                               [&](std::size_t c) { return nodes_[c].exhausted; });
}

std::size_t SearchTree::select_child(std::size_t index, bool skip_exhausted) const {
  const Node& node = nodes_[index];
  const double prior = 1.0 / static_cast<double>(node.children.size());
  const double sqrt_parent = std::sqrt(static_cast<double>(node.visits));
  std::size_t best = node.children.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t child : node.children) {
    const Node& ch = nodes_[child];
    if (skip_exhausted && ch.exhausted) continue;
    const double q = ch.visits == 0 ? 0.0 : ch.value_sum / static_cast<double>(ch.visits);
    const double u = cfg_.c_puct * prior * sqrt_parent / (1.0 + static_cast<double>(ch.visits));
    if (q + u > best_score) {
      best_score = q + u;
      best = child;
    }
  }
  return best;
}

double SearchTree::rollout(const SpanList& start) {
  SpanList state = start;
  auto actions = legal_actions(state, cfg_.constraints);
  while (!is_terminal(state, actions.size())) {
    const auto& a = actions[static_cast<std::size_t>(rng_() % actions.size())];
    state = apply_action(state, a);
    ++stats_.rollout_steps;
    actions = legal_actions(state, cfg_.constraints);
    if (cfg_.rollout_candidates) consider(state, scorer_.score(state));
  }
  return scorer_.reward(state);
}

double SearchTree::simulate() {
  std::vector<std::size_t> path{0};
  double reward = 0.0;
  try {
    std::size_t current = 0;
    const bool skip = cfg_.prune_exhausted && !nodes_[0].exhausted;
    while (!nodes_[current].terminal) {
      if (!nodes_[current].expanded) expand(current);
      if (skip) {
        // A shared node can become exhausted through another parent.
        update_exhausted(current);
        if (nodes_[current].exhausted) break;
      }
      std::optional<std::size_t> unvisited;
      for (std::size_t child : nodes_[current].children) {
        if (nodes_[child].visits == 0) {
          unvisited = child;
          break;
        }
      }
      current = unvisited ? *unvisited : select_child(current, skip);
      path.push_back(current);
      if (unvisited) break;
    }
    reward = rollout(nodes_[current].spans);
  } catch (const ModelError& e) {
    throw SearchAborted(std::string("scoring failed: ") + e.what(), stats());
  }

  for (std::size_t index : path) {
    nodes_[index].visits += 1;
    nodes_[index].value_sum += reward;
  }
  for (auto it = path.rbegin(); it != path.rend(); ++it) update_exhausted(*it);
  ++stats_.simulations;
  return reward;
}

SearchStats SearchTree::stats() const {
  SearchStats s = stats_;
  s.cache_hits = scorer_.cache_hits();
  s.cache_misses = scorer_.cache_misses();
  return s;
}

SearchResult SearchTree::result() const {
  const Candidate* pick = nullptr;
  CoverageWindow window = CoverageWindow::full;
  if (best_full_) {
    pick = &*best_full_;
  } else if (best_upper_) {
    pick = &*best_upper_;
    window = CoverageWindow::upper_only;
  }
  if (pick == nullptr) {
    throw NoValidExplanation("no explanation of document '" + doc_->id + "' satisfies r <= r_max", stats());
  }
  return SearchResult{Explanation(*doc_, pick->spans), pick->scores, window, stats()};
}

SearchResult search(const Document& doc, const SearchConfig& cfg) {
  SearchTree tree(doc, cfg);
  for (int i = 0; i < cfg.iterations; ++i) tree.simulate();
  return tree.result();
}

ExplanationPair explain_both(const Document& doc, const SearchConfig& cfg_base) {
  SearchConfig dep = cfg_base;
  dep.reward.direction = Direction::dependent;
  SearchConfig ind = cfg_base;
  ind.reward.direction = Direction::independent;
  auto dependent = search(doc, dep);
  auto independent = search(doc, ind);
  return {std::move(dependent), std::move(independent)};
}

}  // namespace stressmcts
