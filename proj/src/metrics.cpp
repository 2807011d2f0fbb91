#include <algorithm>
#include <set>

#include "stressmcts/harness.hpp"

namespace stressmcts {

namespace {

double ratio(std::size_t num, std::size_t den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r, bool& zero_division) {
  if (p + r == 0.0) {
    zero_division = true;
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

ClassMetrics one_vs_rest(std::span<const std::string> truth, std::span<const std::string> predicted,
                         const std::string& label, bool& zero_division) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == label;
    const bool p = predicted[i] == label;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  ClassMetrics m;
  m.label = label;
  m.precision = ratio(tp, tp + fp, zero_division);
  m.recall = ratio(tp, tp + fn, zero_division);
  m.f1 = harmonic(m.precision, m.recall, zero_division);
  m.support = tp + fn;
  return m;
}

}  // namespace

ClassificationReport classification_metrics(std::span<const std::string> truth,
                                            std::span<const std::string> predicted,
                                            const std::optional<std::string>& positive_label) {
  if (truth.size() != predicted.size()) throw InvalidArgument("truth and prediction lists differ in length");
  if (truth.empty()) throw InvalidArgument("cannot compute metrics on empty label lists");

  ClassificationReport report;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i];
  report.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

  if (positive_label) {
    const auto m = one_vs_rest(truth, predicted, *positive_label, report.zero_division);
    report.precision = m.precision;
    report.recall = m.recall;
    report.f1 = m.f1;
    report.per_class.push_back(m);
    return report;
  }

  report.macro = true;
  std::set<std::string> labels(truth.begin(), truth.end());
  labels.insert(predicted.begin(), predicted.end());
  for (const auto& label : labels) {
    report.per_class.push_back(one_vs_rest(truth, predicted, label, report.zero_division));
  }
  const auto k = static_cast<double>(report.per_class.size());
  for (const auto& m : report.per_class) {
    report.precision += m.precision / k;
    report.recall += m.recall / k;
    report.f1 += m.f1 / k;
  }
  return report;
}

ClassificationReport evaluate_classifier(const ProbModel& model, const Corpus& corpus, Target target) {
  std::vector<std::string> truth;
  std::vector<std::string> predicted;
  truth.reserve(corpus.size());
  predicted.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    truth.push_back(target_label(doc, target));
    predicted.push_back(model.predict_label(doc.raw_text));
  }
  return classification_metrics(truth, predicted,
                                target == Target::stress ? std::optional<std::string>("1") : std::nullopt);
}

nlohmann::json to_json(const ClassificationReport& report) {
  auto per_class = nlohmann::json::array();
  for (const auto& m : report.per_class) {
    per_class.push_back(
        {{"label", m.label}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}});
  }
  return {{"precision", report.precision},
          {"recall", report.recall},
          {"f1", report.f1},
          {"accuracy", report.accuracy},
          {"averaging", report.macro ? "macro" : "binary"},
          {"zero_division", report.zero_division},
          {"per_class", std::move(per_class)}};
}

}  // namespace stressmcts
