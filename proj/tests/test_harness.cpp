#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "stressmcts/harness.hpp"
#include "support/synthetic_corpus.hpp"
#include "support/toy_models.hpp"

using namespace stressmcts;
using Labels = std::vector<std::string>;

namespace {

// Two-sided p-value by enumerating all 2^n sign assignments of the
// (average) ranks of |d|.
double brute_force_wilcoxon(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0;
    double equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    ranks[i] = below + (equal + 1) / 2;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i) observed += d[i] > 0 ? ranks[i] : 0.0;
  double lower = 0;
  double upper = 0;
  const std::uint64_t all = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < all; ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) w += (mask >> i & 1) ? ranks[i] : 0.0;
    if (w <= observed + 1e-9) ++lower;
    if (w >= observed - 1e-9) ++upper;
  }
  return std::min(1.0, 2 * std::min(lower, upper) / static_cast<double>(all));
}

ExperimentOptions small_options(std::size_t workers = 1) {
  ExperimentOptions opt;
  opt.search.iterations = 150;
  opt.search.seed = 11;
  opt.search.constraints = Constraints{3, 5, 0.2, 0.5};
  opt.alphas = {10.0};
  opt.workers = workers;
  opt.model_name = "mnb";
  return opt;
}

struct Fixture {
  Corpus train = testing::synthetic_corpus({.documents = 160, .seed = 3});
  Corpus test = filter_corpus(testing::synthetic_corpus({.documents = 24, .seed = 4}, Split::test),
                              {"anxiety", "assistance", "relationships"}, 1);
  Corpus train3 = filter_corpus(train, {"anxiety", "assistance", "relationships"});
  std::shared_ptr<const ProbModel> stress = std::make_shared<NaiveBayesModel>(
      NaiveBayesModel::train(train, Target::stress, NbVariant::multinomial));
  std::shared_ptr<const ProbModel> context = std::make_shared<NaiveBayesModel>(
      NaiveBayesModel::train(train3, Target::context, NbVariant::multinomial));
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("binary metrics example") {
  const Labels truth{"1", "1", "0", "0", "1"};
  const Labels pred{"1", "0", "1", "0", "1"};
  const auto r = classification_metrics(truth, pred, std::string("1"));
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK_FALSE(r.macro);
  CHECK_FALSE(r.zero_division);
}

TEST_CASE("perfect predictions, relabeling and errors") {
  const Labels truth{"a", "b", "c", "a", "b", "c", "c"};
  const auto perfect = classification_metrics(truth, truth, std::nullopt);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.macro);
  CHECK(perfect.per_class.size() == 3);

  const Labels pred{"a", "c", "c", "b", "b", "a", "c"};
  const auto base = classification_metrics(truth, pred, std::nullopt);
  // macro F1 over one-vs-rest counts, computed by hand
  // a: tp1 fp1 fn1 -> f1 .5; b: tp1 fp1 fn1 -> .5; c: tp2 fp1 fn1 -> 2/3
  CHECK(base.f1 == doctest::Approx((0.5 + 0.5 + 2.0 / 3.0) / 3));
  CHECK(base.accuracy == doctest::Approx(4.0 / 7.0));

  const std::map<std::string, std::string> rename{{"a", "x"}, {"b", "y"}, {"c", "z"}};
  Labels t2;
  Labels p2;
  for (const auto& t : truth) t2.push_back(rename.at(t));
  for (const auto& p : pred) p2.push_back(rename.at(p));
  const auto renamed = classification_metrics(t2, p2, std::nullopt);
  CHECK(renamed.f1 == base.f1);
  CHECK(renamed.precision == base.precision);
  CHECK(renamed.recall == base.recall);

  const auto none = classification_metrics(Labels{"0", "0"}, Labels{"0", "0"}, std::string("1"));
  CHECK(none.zero_division);
  CHECK(none.f1 == 0.0);

  CHECK_THROWS_AS(classification_metrics(Labels{"a"}, Labels{}, std::nullopt), InvalidArgument);
  CHECK_THROWS_AS(classification_metrics(Labels{}, Labels{}, std::nullopt), InvalidArgument);
}

TEST_CASE("evaluate_classifier on the synthetic corpus") {
  const auto& f = fixture();
  const auto stress = evaluate_classifier(*f.stress, f.train, Target::stress);
  CHECK_FALSE(stress.macro);
  CHECK(stress.accuracy > 0.8);
  const auto context = evaluate_classifier(*f.context, f.train3, Target::context);
  CHECK(context.macro);
  CHECK(context.accuracy > 0.8);
  const auto j = to_json(context);
  CHECK(j["averaging"] == "macro");
}

TEST_CASE("Wilcoxon examples") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> zero(5, 0.0);
  const auto r = wilcoxon_signed_rank(x, zero);
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(r.w_plus == 15);
  CHECK(r.w_minus == 0);
  CHECK(r.method == WilcoxonMethod::exact);

  CHECK_THROWS_AS(wilcoxon_signed_rank(x, x), AllDifferencesZero);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{0, 0}), InvalidArgument);
  CHECK_THROWS_AS(wilcoxon_signed_rank(x, std::vector<double>{1}), InvalidArgument);

  const std::vector<double> a{1, -1, 2, -2, 3, -3};
  CHECK(wilcoxon_signed_rank(a, std::vector<double>(6, 0.0)).p_value == 1.0);
  CHECK(wilcoxon_signed_rank(a, std::vector<double>(6, 0.0), WilcoxonMethod::normal).p_value == 1.0);
}

TEST_CASE("exact Wilcoxon matches full enumeration") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 5 + rng() % 11;
    std::vector<double> d(n);
    // small integer magnitudes force ties; zeros get dropped
    for (double& v : d) v = static_cast<double>(static_cast<int>(rng() % 9) - 4) + (rng() % 4 == 0 ? 0.5 : 0.0);
    std::vector<double> nz;
    for (double v : d) {
      if (v != 0.0) nz.push_back(v);
    }
    if (nz.size() < 5) continue;
    const auto r = wilcoxon_signed_rank(d, std::vector<double>(n, 0.0), WilcoxonMethod::exact);
    CHECK(r.n == nz.size());
    CHECK(r.p_value == doctest::Approx(brute_force_wilcoxon(nz)).epsilon(1e-12));
  }
}

TEST_CASE("exact and normal Wilcoxon agree at n = 15") {
  std::mt19937_64 rng(67);
  std::normal_distribution<double> noise(0.3, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(15);
    for (double& v : x) v = noise(rng);
    const std::vector<double> y(15, 0.0);
    const auto exact = wilcoxon_signed_rank(x, y, WilcoxonMethod::exact);
    const auto normal = wilcoxon_signed_rank(x, y, WilcoxonMethod::normal);
    CHECK(std::abs(exact.p_value - normal.p_value) <= 0.02);
  }
}

TEST_CASE("mean_std uses the population convention") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = mean_std(v);
  CHECK(m.mean == 5.0);
  CHECK(m.std == 2.0);
  CHECK(mean_std(std::vector<double>{}).mean == 0.0);
}

TEST_CASE("experiment on the synthetic corpus") {
  const auto& f = fixture();
  REQUIRE(f.test.size() >= 5);
  const auto reports = run_experiment(f.test, f.stress, f.context, small_options());
  REQUIRE(reports.size() == 1);
  const auto& rep = reports.front();
  CHECK(rep.records.size() + rep.failures.size() == f.test.size());
  CHECK(rep.context_label_count == 3);

  // aggregates recomputed independently from the records
  double sum = 0;
  for (const auto& r : rep.records) sum += r.independent.scores.H;
  CHECK(rep.aggregates.independent_H.mean == doctest::Approx(sum / static_cast<double>(rep.records.size())));
  double var = 0;
  const double mean = rep.aggregates.dependent_S.mean;
  for (const auto& r : rep.records) var += (r.dependent.scores.S - mean) * (r.dependent.scores.S - mean);
  CHECK(rep.aggregates.dependent_S.std == doctest::Approx(std::sqrt(var / static_cast<double>(rep.records.size()))));

  for (const auto& r : rep.records) {
    for (const auto* e : {&r.dependent, &r.independent}) {
      CHECK(e->spans.size() <= 3);
      for (const auto& s : e->spans) CHECK(s.length >= 5);
      CHECK(e->scores.r <= 0.5);
      if (e->window == CoverageWindow::full) CHECK(e->scores.r >= 0.2);
    }
  }
  CHECK(rep.aggregates.dependent_H.mean < rep.aggregates.independent_H.mean);

  const auto j = to_json(rep);
  CHECK(j["records"].size() == rep.records.size());
  CHECK(j["config"]["alpha"] == 10.0);
  CHECK(j["aggregates"]["dependent"]["H"]["mean"].get<double>() == rep.aggregates.dependent_H.mean);
  const auto table = render_table(rep);
  CHECK(table.find("Original") != std::string::npos);
  CHECK(table.find("Wilcoxon") != std::string::npos);
}

TEST_CASE("experiment reports are identical across runs and worker counts") {
  const auto& f = fixture();
  const auto one = run_experiment(f.test, f.stress, f.context, small_options(1));
  const auto again = run_experiment(f.test, f.stress, f.context, small_options(1));
  const auto four = run_experiment(f.test, f.stress, f.context, small_options(4));
  CHECK(to_json(one.front()).dump() == to_json(again.front()).dump());
  CHECK(to_json(one.front()).dump() == to_json(four.front()).dump());
}

TEST_CASE("per-document failures make a partial report") {
  const auto& f = fixture();
  Corpus c = f.test;
  c.documents.push_back(make_document("tiny", "too short", 1, "anxiety"));
  const auto rep = run_experiment(c, f.stress, f.context, small_options()).front();
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures.front().doc_id == "tiny");
  CHECK(rep.partial());
  CHECK(rep.records.size() == f.test.size());
}

TEST_CASE("empty corpus gives an empty report") {
  const auto& f = fixture();
  const auto rep = run_experiment(Corpus{}, f.stress, f.context, small_options()).front();
  CHECK(rep.records.empty());
  CHECK_FALSE(rep.wilcoxon);
  CHECK_THROWS_AS(emit_histograms(rep, Quantity::stress), InvalidArgument);
}

TEST_CASE("alpha sweep yields one report per alpha") {
  const auto& f = fixture();
  auto opt = small_options();
  opt.alphas = {0.1, 1, 10};
  const auto reps = run_experiment(f.test, f.stress, f.context, opt);
  REQUIRE(reps.size() == 3);
  CHECK(reps[0].alpha == 0.1);
  CHECK(reps[2].alpha == 10);
  opt.alphas = {-1};
  CHECK_THROWS_AS(run_experiment(f.test, f.stress, f.context, opt), InvalidArgument);
}

TEST_CASE("histograms") {
  const auto& f = fixture();
  const auto rep = run_experiment(f.test, f.stress, f.context, small_options()).front();
  for (auto q : {Quantity::stress, Quantity::entropy}) {
    const auto rows = emit_histograms(rep, q, 20);
    CHECK(rows.size() == 60);
    std::map<std::string, std::size_t> totals;
    for (const auto& r : rows) totals[r.series] += r.count;
    CHECK(totals.size() == 3);
    for (const auto& [series, total] : totals) CHECK(total == rep.records.size());
    CHECK(rows.back().bin_right == doctest::Approx(q == Quantity::stress ? 1.0 : std::log(3.0)));
  }
  CHECK_THROWS_AS(emit_histograms(rep, Quantity::stress, 0), InvalidArgument);

  ExperimentReport same = rep;
  for (auto& r : same.records) r.original.S = 0.37;
  const auto rows = emit_histograms(same, Quantity::stress, 10);
  std::size_t nonzero = 0;
  for (const auto& r : rows) nonzero += (r.series == "original" && r.count > 0);
  CHECK(nonzero == 1);
  for (auto& r : same.records) r.original.S = 1.0;
  const auto edge = emit_histograms(same, Quantity::stress, 10);
  CHECK(edge[9].count == same.records.size());

  const auto csv = histograms_csv(rows);
  CHECK(csv.rfind("series,bin_left,bin_right,count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
}
