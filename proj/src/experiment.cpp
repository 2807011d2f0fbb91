#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "stressmcts/harness.hpp"

namespace stressmcts {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

ExplanationRecord to_record(const SearchResult& r) {
  return ExplanationRecord{r.best.spans(), r.scores, r.window, r.stats};
}

nlohmann::json scores_json(const ExplanationScores& s) {
  return {{"S", s.S}, {"H", s.H}, {"R", s.R}, {"r", s.r}};
}

nlohmann::json record_json(const ExplanationRecord& e) {
  auto spans = nlohmann::json::array();
  for (const auto& s : e.spans) spans.push_back({{"start", s.start}, {"length", s.length}});
  auto j = scores_json(e.scores);
  j["spans"] = std::move(spans);
  j["r_window"] = std::string(to_string(e.window));
  j["stats"] = {{"simulations", e.stats.simulations},
                {"nodes_materialized", e.stats.nodes_materialized},
                {"nodes_expanded", e.stats.nodes_expanded},
                {"rollout_steps", e.stats.rollout_steps},
                {"cache_hits", e.stats.cache_hits},
                {"cache_misses", e.stats.cache_misses},
                {"max_depth", e.stats.max_depth}};
  return j;
}

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string cell(const MeanStd& m) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << m.mean << " ± " << m.std;
  return out.str();
}

}  // namespace

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

std::uint64_t document_seed(std::uint64_t base, std::string_view doc_id) {
  return splitmix64(base ^ fnv1a(doc_id));
}

ExperimentAggregates aggregate(std::span<const DocumentRecord> records) {
  auto column = [&](auto getter) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(getter(r));
    return mean_std(v);
  };
  ExperimentAggregates a;
  a.original_S = column([](const DocumentRecord& r) { return r.original.S; });
  a.original_H = column([](const DocumentRecord& r) { return r.original.H; });
  a.dependent_S = column([](const DocumentRecord& r) { return r.dependent.scores.S; });
  a.dependent_H = column([](const DocumentRecord& r) { return r.dependent.scores.H; });
  a.independent_S = column([](const DocumentRecord& r) { return r.independent.scores.S; });
  a.independent_H = column([](const DocumentRecord& r) { return r.independent.scores.H; });
  return a;
}

std::vector<ExperimentReport> run_experiment(const Corpus& corpus, std::shared_ptr<const ProbModel> stress_model,
                                             std::shared_ptr<const ProbModel> context_model,
                                             const ExperimentOptions& options) {
  SearchConfig base = options.search;
  base.reward.stress_model = std::move(stress_model);
  base.reward.context_model = std::move(context_model);
  base.validate();
  for (double a : options.alphas) {
    if (!(a >= 0.0)) throw InvalidArgument("alpha values must be non-negative");
  }

  std::vector<ExperimentReport> reports;
  for (double alpha : options.alphas) {
    ExperimentReport report;
    report.model_name = options.model_name;
    report.alpha = alpha;
    report.seed = base.seed;
    report.iterations = base.iterations;
    report.c_puct = base.c_puct;
    report.constraints = base.constraints;
    report.context_label_count = base.reward.context_model->labels().size();

    const std::size_t n = corpus.size();
    std::vector<std::optional<DocumentRecord>> slots(n);
    std::vector<std::optional<std::string>> errors(n);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        const Document& doc = corpus.documents[i];
        try {
          SearchConfig cfg = base;
          cfg.reward.alpha = alpha;
          cfg.seed = document_seed(base.seed, doc.id);

          DocumentRecord rec;
          rec.doc_id = doc.id;
          rec.context = doc.context;
          rec.tokens = doc.display_tokens.size();
          const Explanation root = Explanation::root(doc);
          rec.original.S = stress_S(root, *cfg.reward.stress_model);
          rec.original.H = entropy_H(root, *cfg.reward.context_model);
          rec.original.r = 1.0;

          const auto pair = explain_both(doc, cfg);
          rec.dependent = to_record(pair.dependent);
          rec.independent = to_record(pair.independent);
          slots[i] = std::move(rec);
        } catch (const Error& e) {
          errors[i] = e.what();
        }
      }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(n, 1)));
    if (workers == 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (slots[i]) {
        report.records.push_back(std::move(*slots[i]));
      } else {
        report.failures.push_back({corpus.documents[i].id, errors[i].value_or("unknown failure")});
      }
    }
    report.aggregates = aggregate(report.records);

    std::vector<double> dep;
    std::vector<double> ind;
    for (const auto& r : report.records) {
      dep.push_back(r.dependent.scores.H);
      ind.push_back(r.independent.scores.H);
    }
    try {
      if (!report.records.empty()) report.wilcoxon = wilcoxon_signed_rank(ind, dep);
    } catch (const Error& e) {
      report.wilcoxon_note = e.what();
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

nlohmann::json to_json(const ExperimentReport& report) {
  auto records = nlohmann::json::array();
  for (const auto& r : report.records) {
    records.push_back({{"doc_id", r.doc_id},
                       {"context", r.context},
                       {"tokens", r.tokens},
                       {"original", {{"S", r.original.S}, {"H", r.original.H}}},
                       {"dependent", record_json(r.dependent)},
                       {"independent", record_json(r.independent)}});
  }
  auto failures = nlohmann::json::array();
  for (const auto& f : report.failures) failures.push_back({{"doc_id", f.doc_id}, {"message", f.message}});

  const auto& a = report.aggregates;
  nlohmann::json j;
  j["config"] = {{"model", report.model_name},
                 {"alpha", report.alpha},
                 {"seed", report.seed},
                 {"iterations", report.iterations},
                 {"c_puct", report.c_puct},
                 {"n_phrases", report.constraints.n_phrases_max},
                 {"n_length", report.constraints.n_length_min},
                 {"r_min", report.constraints.r_min},
                 {"r_max", report.constraints.r_max},
                 {"context_labels", report.context_label_count}};
  j["aggregates"] = {
      {"original", {{"S", mean_std_json(a.original_S)}, {"H", mean_std_json(a.original_H)}}},
      {"dependent", {{"S", mean_std_json(a.dependent_S)}, {"H", mean_std_json(a.dependent_H)}}},
      {"independent", {{"S", mean_std_json(a.independent_S)}, {"H", mean_std_json(a.independent_H)}}}};
  if (report.wilcoxon) {
    j["wilcoxon"] = {{"p_value", report.wilcoxon->p_value},
                     {"w_plus", report.wilcoxon->w_plus},
                     {"w_minus", report.wilcoxon->w_minus},
                     {"n", report.wilcoxon->n},
                     {"method", report.wilcoxon->method == WilcoxonMethod::exact ? "exact" : "normal"}};
  } else {
    j["wilcoxon"] = nullptr;
    j["wilcoxon_note"] = report.wilcoxon_note;
  }
  j["documents"] = report.records.size();
  j["partial"] = report.partial();
  j["failures"] = std::move(failures);
  j["records"] = std::move(records);
  return j;
}

std::string render_table(const ExperimentReport& report) {
  const auto& a = report.aggregates;
  std::ostringstream out;
  out << "model=" << report.model_name << "  alpha=" << report.alpha << "  documents=" << report.records.size();
  if (report.partial()) out << "  skipped=" << report.failures.size();
  out << "\n";
  out << std::left << std::setw(4) << "" << std::setw(20) << "Original" << std::setw(20) << "Dependent"
      << "Independent\n";
  out << std::setw(4) << "S" << std::setw(20) << cell(a.original_S) << std::setw(20) << cell(a.dependent_S)
      << cell(a.independent_S) << "\n";
  out << std::setw(4) << "H" << std::setw(20) << cell(a.original_H) << std::setw(20) << cell(a.dependent_H)
      << cell(a.independent_H) << "\n";
  if (report.wilcoxon) {
    out << "Wilcoxon signed-rank (dependent H vs independent H): p = " << std::scientific << std::setprecision(3)
        << report.wilcoxon->p_value << " (n = " << report.wilcoxon->n << ")\n";
  } else {
    out << "Wilcoxon signed-rank: not available (" << report.wilcoxon_note << ")\n";
  }
  return out.str();
}

std::vector<HistogramRow> emit_histograms(const ExperimentReport& report, Quantity quantity, std::size_t bins) {
  if (report.records.empty()) throw InvalidArgument("cannot build histograms from an empty report");
  if (bins < 1) throw InvalidArgument("histogram needs at least one bin");
  const double hi = quantity == Quantity::stress
                        ? 1.0
                        : std::log(static_cast<double>(std::max<std::size_t>(report.context_label_count, 2)));
  const double width = hi / static_cast<double>(bins);

  std::vector<HistogramRow> rows;
  auto series = [&](const std::string& name, auto getter) {
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& r : report.records) {
      const double v = getter(r);
      auto b = static_cast<std::ptrdiff_t>(std::floor(v / width));
      b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    for (std::size_t b = 0; b < bins; ++b) {
      rows.push_back({name, width * static_cast<double>(b),
                      b + 1 == bins ? hi : width * static_cast<double>(b + 1), counts[b]});
    }
  };
  const bool stress = quantity == Quantity::stress;
  series("original", [&](const DocumentRecord& r) { return stress ? r.original.S : r.original.H; });
  series("dependent", [&](const DocumentRecord& r) { return stress ? r.dependent.scores.S : r.dependent.scores.H; });
  series("independent",
         [&](const DocumentRecord& r) { return stress ? r.independent.scores.S : r.independent.scores.H; });
  return rows;
}

std::string histograms_csv(std::span<const HistogramRow> rows) {
  std::ostringstream out;
  out << "series,bin_left,bin_right,count\n";
  out << std::setprecision(17);
  for (const auto& r : rows) out << r.series << ',' << r.bin_left << ',' << r.bin_right << ',' << r.count << '\n';
  return out.str();
}

}  // namespace stressmcts
