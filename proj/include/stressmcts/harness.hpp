#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "stressmcts/corpus.hpp"
#include "stressmcts/explain.hpp"
#include "stressmcts/mcts.hpp"
#include "stressmcts/models.hpp"

namespace stressmcts {

// ---------------------------------------------------------------------------
// Classification metrics

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Set when some precision/recall/F1 denominator was zero (value reported as 0).
  bool zero_division = false;
  bool macro = false;
  std::vector<ClassMetrics> per_class;
};

// Binary metrics for `positive_label`, or macro-averaged one-vs-rest metrics
// over the union of observed labels when it is nullopt.
ClassificationReport classification_metrics(std::span<const std::string> truth,
                                            std::span<const std::string> predicted,
                                            const std::optional<std::string>& positive_label);

// Predicts every document and scores against its target label. Stress is
// scored as binary with positive label "1"; context is macro-averaged.
ClassificationReport evaluate_classifier(const ProbModel& model, const Corpus& corpus, Target target);

nlohmann::json to_json(const ClassificationReport& report);

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class WilcoxonMethod { automatic, exact, normal };

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;  // pairs left after dropping zero differences
  WilcoxonMethod method = WilcoxonMethod::exact;
};

class AllDifferencesZero : public Error {
 public:
  AllDifferencesZero() : Error("all paired differences are zero; the signed-rank test is undefined") {}
};

// Two-sided test on x - y. Zero differences are dropped and tied magnitudes
// get average ranks. `automatic` uses the exact null distribution for
// n <= 15 and the continuity-corrected normal approximation above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

// ---------------------------------------------------------------------------
// Explanation experiments

struct ExplanationRecord {
  SpanList spans;
  ExplanationScores scores;
  CoverageWindow window = CoverageWindow::full;
  SearchStats stats;
};

struct DocumentRecord {
  std::string doc_id;
  std::string context;
  std::size_t tokens = 0;
  ExplanationScores original;
  ExplanationRecord dependent;
  ExplanationRecord independent;
};

struct DocumentFailure {
  std::string doc_id;
  std::string message;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Mean and population standard deviation.
MeanStd mean_std(std::span<const double> values);

struct ExperimentAggregates {
  MeanStd original_S, original_H;
  MeanStd dependent_S, dependent_H;
  MeanStd independent_S, independent_H;
};

struct ExperimentReport {
  std::string model_name;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double c_puct = 0.0;
  Constraints constraints;
  std::size_t context_label_count = 0;

  std::vector<DocumentRecord> records;
  std::vector<DocumentFailure> failures;
  ExperimentAggregates aggregates;
  std::optional<WilcoxonResult> wilcoxon;  // dependent H vs independent H
  std::string wilcoxon_note;

  bool partial() const { return !failures.empty(); }
};

struct ExperimentOptions {
  SearchConfig search;  // alpha and direction are overridden per run
  std::vector<double> alphas{10.0};
  std::size_t workers = 1;
  std::string model_name;
};

// Per-document search seeds derive from (search.seed, doc id), so results do
// not depend on the worker count.
std::uint64_t document_seed(std::uint64_t base, std::string_view doc_id);

ExperimentAggregates aggregate(std::span<const DocumentRecord> records);

std::vector<ExperimentReport> run_experiment(const Corpus& corpus, std::shared_ptr<const ProbModel> stress_model,
                                             std::shared_ptr<const ProbModel> context_model,
                                             const ExperimentOptions& options);

nlohmann::json to_json(const ExperimentReport& report);
// Fixed-width table: rows S and H, columns original / dependent / independent.
std::string render_table(const ExperimentReport& report);

enum class Quantity { stress, entropy };

struct HistogramRow {
  std::string series;
  double bin_left = 0.0;
  double bin_right = 0.0;
  std::size_t count = 0;
};

// Stress bins span [0, 1]; entropy bins span [0, ln K] with K the context
// label count recorded in the report.
std::vector<HistogramRow> emit_histograms(const ExperimentReport& report, Quantity quantity, std::size_t bins = 20);
std::string histograms_csv(std::span<const HistogramRow> rows);

}  // namespace stressmcts
