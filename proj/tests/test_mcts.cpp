#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "stressmcts/mcts.hpp"
#include "support/toy_models.hpp"

using namespace stressmcts;
using namespace stressmcts::testing;

namespace {

Document numbered_document(std::size_t n) {
  std::string text;
  for (std::size_t i = 0; i < n; ++i) text += "t" + std::to_string(i) + " ";
  return make_document("n" + std::to_string(n), text, 1, "relationships");
}

// Every structurally applicable action whose result satisfies conditions a
// and b, in canonical order.
std::vector<Action> legal_by_predicate(const SpanList& spans, const Constraints& c) {
  std::vector<Action> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    std::vector<Action> candidates{{ActionKind::trim_front, i, 0}, {ActionKind::trim_back, i, 0}};
    for (std::size_t o = 0; o <= spans[i].length; ++o) candidates.push_back({ActionKind::split, i, o});
    for (const auto& a : candidates) {
      SpanList next;
      try {
        next = apply_action(spans, a);
      } catch (const InvalidArgument&) {
        continue;
      }
      const bool a_ok = next.size() <= c.n_phrases_max;
      const bool b_ok = std::all_of(next.begin(), next.end(), [&](const PhraseSpan& s) { return s.length >= c.n_length_min; });
      if (a_ok && b_ok) out.push_back(a);
    }
  }
  return out;
}

SearchConfig toy_search(double alpha, Direction dir, std::uint64_t seed, int iterations) {
  SearchConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.constraints = Constraints{3, 3, 0.2, 0.6};
  cfg.reward.alpha = alpha;
  cfg.reward.direction = dir;
  cfg.reward.stress_model = toy_stress_model();
  cfg.reward.context_model = toy_context_model();
  return cfg;
}

std::size_t covered(const SpanList& spans) {
  std::size_t n = 0;
  for (const auto& s : spans) n += s.length;
  return n;
}

}  // namespace

TEST_CASE("legal_actions examples") {
  const Constraints c{3, 5, 0.2, 0.5};
  const auto twelve = legal_actions(SpanList{{0, 12}}, c);
  CHECK(twelve == std::vector<Action>{{ActionKind::trim_front, 0, 0},
                                      {ActionKind::trim_back, 0, 0},
                                      {ActionKind::split, 0, 5},
                                      {ActionKind::split, 0, 6}});
  CHECK(legal_actions(SpanList{{0, 5}}, c).empty());
  const auto three = legal_actions(SpanList{{0, 6}, {7, 6}, {14, 6}}, c);
  CHECK(three.size() == 6);
  CHECK(std::none_of(three.begin(), three.end(), [](const Action& a) { return a.kind == ActionKind::split; }));
}

TEST_CASE("legal_actions agrees with the legality predicate") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const Constraints c{1 + rng() % 4, 1 + rng() % 6, 0.0, 1.0};
    SpanList spans;
    std::size_t pos = rng() % 3;
    // only states that already satisfy conditions a and b are reachable
    const std::size_t count = 1 + rng() % c.n_phrases_max;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t len = c.n_length_min + rng() % 20;
      spans.push_back({pos, len});
      pos += len + 1 + rng() % 3;
    }
    CHECK(legal_actions(spans, c) == legal_by_predicate(spans, c));
  }
}

TEST_CASE("apply_action examples") {
  CHECK(apply_action(SpanList{{0, 12}}, {ActionKind::trim_front, 0, 0}) == SpanList{{1, 11}});
  CHECK(apply_action(SpanList{{0, 12}}, {ActionKind::trim_back, 0, 0}) == SpanList{{0, 11}});
  CHECK(apply_action(SpanList{{0, 12}}, {ActionKind::split, 0, 5}) == SpanList{{0, 5}, {6, 6}});
  CHECK(apply_action(SpanList{{0, 4}, {6, 9}}, {ActionKind::split, 1, 3}) == SpanList{{0, 4}, {6, 3}, {10, 5}});

  const SpanList s{{2, 10}};
  const Action front{ActionKind::trim_front, 0, 0};
  const Action back{ActionKind::trim_back, 0, 0};
  CHECK(apply_action(apply_action(s, front), back) == apply_action(apply_action(s, back), front));

  CHECK_THROWS_AS(apply_action(SpanList{{0, 1}}, front), InvalidArgument);
  CHECK_THROWS_AS(apply_action(SpanList{{0, 5}}, {ActionKind::split, 0, 4}), InvalidArgument);
  CHECK_THROWS_AS(apply_action(SpanList{{0, 5}}, {ActionKind::split, 3, 2}), InvalidArgument);
}

TEST_CASE("10,000 random walks keep conditions a and b") {
  std::mt19937_64 rng(2024);
  std::size_t steps = 0;
  for (int walk = 0; walk < 10000; ++walk) {
    const std::size_t n = 5 + rng() % 60;
    const Constraints c{1 + rng() % 4, 1 + rng() % 5, 0.2, 0.5};
    SpanList state{{0, n}};
    for (auto actions = legal_actions(state, c); !actions.empty(); actions = legal_actions(state, c)) {
      const auto before = covered(state);
      state = apply_action(state, actions[rng() % actions.size()]);
      ++steps;
      REQUIRE(covered(state) + 1 == before);
      const auto v = check_constraints(state, n, c);
      REQUIRE(std::find(v.begin(), v.end(), Violation::phrase_count) == v.end());
      REQUIRE(std::find(v.begin(), v.end(), Violation::phrase_length) == v.end());
      for (std::size_t i = 1; i < state.size(); ++i) REQUIRE(state[i - 1].end() < state[i].start);
      REQUIRE(state.back().end() <= n);
    }
  }
  CHECK(steps > 10000);
}

TEST_CASE("backpropagation conserves visits and value") {
  std::mt19937_64 rng(5);
  const auto doc = toy_document(rng, 40, "bp");
  SearchTree tree(doc, toy_search(10, Direction::dependent, 9, 1));
  double total = 0.0;
  for (int i = 1; i <= 500; ++i) {
    total += tree.simulate();
    REQUIRE(tree.root_visits() == static_cast<std::uint64_t>(i));
    REQUIRE(tree.root_value_sum() == total);
  }
  CHECK(tree.stats().simulations == 500);
  CHECK(tree.node_count() == tree.stats().nodes_materialized);
}

TEST_CASE("search is deterministic under a fixed seed") {
  std::mt19937_64 rng(6);
  const auto doc = toy_document(rng, 60, "det");
  auto cfg = toy_search(10, Direction::independent, 77, 800);
  const auto a = search(doc, cfg);
  const auto b = search(doc, cfg);
  CHECK(a.best.spans() == b.best.spans());
  CHECK(a.scores.R == b.scores.R);
  CHECK(a.stats.nodes_materialized == b.stats.nodes_materialized);
  CHECK(a.stats.rollout_steps == b.stats.rollout_steps);
}

TEST_CASE("alpha zero gives the same explanation for both directions") {
  std::mt19937_64 rng(8);
  for (int d = 0; d < 5; ++d) {
    const auto doc = toy_document(rng, 30, "a0-" + std::to_string(d));
    const auto pair = explain_both(doc, toy_search(0, Direction::dependent, 3, 400));
    CHECK(pair.dependent.best.spans() == pair.independent.best.spans());
    CHECK(pair.dependent.scores.R == pair.independent.scores.R);
  }
}

TEST_CASE("search configuration errors") {
  const auto doc = numbered_document(2);
  CHECK_THROWS_AS(SearchTree(doc, toy_search(1, Direction::dependent, 0, 10)), InvalidArgument);
  auto cfg = toy_search(1, Direction::dependent, 0, 0);
  const auto ok = numbered_document(20);
  CHECK_THROWS_AS(search(ok, cfg), InvalidArgument);
  cfg = toy_search(1, Direction::dependent, 0, 10);
  cfg.c_puct = 0;
  CHECK_THROWS_AS(search(ok, cfg), InvalidArgument);
}

TEST_CASE("results satisfy the recorded coverage window") {
  std::mt19937_64 rng(10);
  for (int d = 0; d < 10; ++d) {
    const auto doc = toy_document(rng, 20 + rng() % 60, "w" + std::to_string(d));
    const auto cfg = toy_search(10, d % 2 ? Direction::independent : Direction::dependent, d, 300);
    const auto res = search(doc, cfg);
    const auto v = check_constraints(res.best, cfg.constraints);
    CHECK(std::find(v.begin(), v.end(), Violation::phrase_count) == v.end());
    CHECK(std::find(v.begin(), v.end(), Violation::phrase_length) == v.end());
    CHECK(res.scores.r <= cfg.constraints.r_max);
    if (res.window == CoverageWindow::full) CHECK(res.scores.r >= cfg.constraints.r_min);
    CHECK(res.scores.R == doctest::Approx(reward_R(res.best, cfg.reward)).epsilon(1e-12));
  }
}

TEST_CASE("fallback window when the lower bound cannot be met") {
  // 10 tokens: no token count lands in [3.5, 3.8], so only r <= r_max holds.
  const auto doc = numbered_document(10);
  SearchConfig cfg = toy_search(1, Direction::dependent, 1, 200);
  cfg.constraints = Constraints{1, 3, 0.35, 0.38};
  const auto res = search(doc, cfg);
  CHECK(res.window == CoverageWindow::upper_only);
  CHECK(res.scores.r <= 0.38);

  cfg.constraints = Constraints{1, 5, 0.2, 0.3};
  CHECK_THROWS_AS(search(doc, cfg), NoValidExplanation);
}

TEST_CASE("search reaches the brute-force optimum on small documents") {
  std::mt19937_64 rng(31);
  for (int d = 0; d < 6; ++d) {
    const auto doc = toy_document(rng, 12 + rng() % 4, "o" + std::to_string(d));
    for (auto dir : {Direction::dependent, Direction::independent}) {
      const auto cfg = toy_search(d % 2 ? 1.0 : 10.0, dir, d, 5000);
      const auto oracle = brute_force_optimum(doc, cfg.constraints, cfg.reward);
      REQUIRE(oracle.feasible > 0);
      const auto res = search(doc, cfg);
      CHECK(res.window == CoverageWindow::full);
      CHECK(res.scores.R == doctest::Approx(oracle.reward).epsilon(1e-9));
    }
  }
}

TEST_CASE("optimal explanations order entropy by direction") {
  std::mt19937_64 rng(37);
  for (int d = 0; d < 20; ++d) {
    const auto doc = toy_document(rng, 15, "m" + std::to_string(d));
    const auto dep_cfg = toy_search(10, Direction::dependent, d, 5000);
    auto ind_cfg = dep_cfg;
    ind_cfg.reward.direction = Direction::independent;

    const auto dep = brute_force_optimum(doc, dep_cfg.constraints, dep_cfg.reward);
    const auto ind = brute_force_optimum(doc, ind_cfg.constraints, ind_cfg.reward);
    const double h_dep = entropy_H(Explanation(doc, dep.spans), *dep_cfg.reward.context_model);
    const double h_ind = entropy_H(Explanation(doc, ind.spans), *ind_cfg.reward.context_model);
    CHECK(h_dep <= h_ind + 1e-12);

    const auto pair = explain_both(doc, dep_cfg);
    CHECK(pair.dependent.scores.H <= pair.independent.scores.H + 1e-12);
  }
}

TEST_CASE("with enough simulations every reachable explanation becomes a node") {
  std::mt19937_64 rng(41);
  const auto doc = toy_document(rng, 14, "reach");
  const auto cfg = toy_search(10, Direction::dependent, 1, 1);

  // breadth-first closure of the root under legal actions, stopping at
  // terminal states
  std::set<SpanList> seen{{{0, 14}}};
  std::vector<SpanList> frontier{{{0, 14}}};
  while (!frontier.empty()) {
    const auto s = frontier.back();
    frontier.pop_back();
    if (proportion_r(s, 14) <= cfg.constraints.r_min) continue;
    for (const auto& a : legal_actions(s, cfg.constraints)) {
      auto next = apply_action(s, a);
      if (seen.insert(next).second) frontier.push_back(std::move(next));
    }
  }

  SearchTree tree(doc, cfg);
  for (int i = 0; i < 20000; ++i) tree.simulate();
  CHECK(tree.node_count() == seen.size());
}

TEST_CASE("plain tree mode keeps one node per action path") {
  std::mt19937_64 rng(43);
  const auto doc = toy_document(rng, 14, "plain");
  auto cfg = toy_search(10, Direction::dependent, 1, 1);
  cfg.share_transpositions = false;
  cfg.prune_exhausted = false;
  SearchTree tree(doc, cfg);
  for (int i = 0; i < 300; ++i) tree.simulate();
  CHECK(tree.root_visits() == 300);
  CHECK(tree.node_count() == tree.stats().nodes_materialized);
  CHECK_NOTHROW(tree.result());
}
