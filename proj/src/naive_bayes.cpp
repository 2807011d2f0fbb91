#include <algorithm>
#include <cmath>

#include "stressmcts/models.hpp"

namespace stressmcts {

namespace {

// Stable softmax over joint log likelihoods.
Distribution normalize_log(const Eigen::VectorXd& jll) {
  const double m = jll.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < jll.size(); ++i) sum += std::exp(jll[i] - m);
  const double lse = m + std::log(sum);
  Distribution out(static_cast<std::size_t>(jll.size()));
  for (Eigen::Index i = 0; i < jll.size(); ++i) out[static_cast<std::size_t>(i)] = std::exp(jll[i] - lse);
  return out;
}

}  // namespace

NaiveBayesModel::NaiveBayesModel(std::vector<std::string> labels, Vocabulary vocab, NbVariant variant,
                                 double smoothing, std::vector<double> log_priors,
                                 Eigen::MatrixXd feature_log_prob)
    : ProbModel(std::move(labels)),
      vocab_(std::move(vocab)),
      variant_(variant),
      smoothing_(smoothing),
      log_priors_(std::move(log_priors)),
      feature_log_prob_(std::move(feature_log_prob)) {
  precompute();
}

void NaiveBayesModel::precompute() {
  if (variant_ != NbVariant::bernoulli) return;
  feature_log_neg_ = feature_log_prob_.unaryExpr([](double lp) { return std::log1p(-std::exp(lp)); });
  log_neg_sum_ = feature_log_neg_.rowwise().sum();
}

NaiveBayesModel NaiveBayesModel::train(const Corpus& corpus, Target target, NbVariant variant,
                                       double smoothing) {
  if (corpus.empty()) throw InvalidArgument("cannot train on an empty corpus");
  Vocabulary vocab = fit_vocabulary(corpus);
  auto labels = target_labels(corpus, target);
  std::vector<CountVector> rows;
  std::vector<std::size_t> y;
  rows.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    rows.push_back(vectorize(doc.raw_text, vocab));
    const auto label = target_label(doc, target);
    y.push_back(static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin()));
  }
  return train(rows, y, std::move(labels), std::move(vocab), variant, smoothing);
}

NaiveBayesModel NaiveBayesModel::train(const std::vector<CountVector>& rows,
                                       const std::vector<std::size_t>& y, std::vector<std::string> labels,
                                       Vocabulary vocab, NbVariant variant, double smoothing) {
  if (!(smoothing > 0.0)) throw InvalidArgument("smoothing must be positive");
  if (vocab.empty()) throw InvalidArgument("empty vocabulary");
  if (rows.empty() || rows.size() != y.size()) throw InvalidArgument("rows and labels must be non-empty and aligned");
  const std::size_t k = labels.size();
  const auto v = static_cast<Eigen::Index>(vocab.size());

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), v);
  std::vector<double> class_docs(k, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (y[i] >= k) throw InvalidArgument("label index out of range");
    const auto c = static_cast<Eigen::Index>(y[i]);
    class_docs[y[i]] += 1.0;
    for (const auto& [col, n] : rows[i].entries) {
      counts(c, col) += (variant == NbVariant::bernoulli) ? 1.0 : static_cast<double>(n);
    }
  }

  std::vector<double> log_priors(k);
  Eigen::MatrixXd flp(static_cast<Eigen::Index>(k), v);
  for (std::size_t c = 0; c < k; ++c) {
    if (class_docs[c] == 0.0) throw InvalidArgument("class '" + labels[c] + "' has no training documents");
    log_priors[c] = std::log(class_docs[c] / static_cast<double>(rows.size()));
    const auto row = static_cast<Eigen::Index>(c);
    if (variant == NbVariant::multinomial) {
      const double denom = counts.row(row).sum() + smoothing * static_cast<double>(v);
      flp.row(row) = ((counts.row(row).array() + smoothing) / denom).log();
    } else {
      const double denom = class_docs[c] + 2.0 * smoothing;
      flp.row(row) = ((counts.row(row).array() + smoothing) / denom).log();
    }
  }
  return NaiveBayesModel(std::move(labels), std::move(vocab), variant, smoothing, std::move(log_priors),
                         std::move(flp));
}

ModelKind NaiveBayesModel::kind() const {
  return variant_ == NbVariant::bernoulli ? ModelKind::bernoulli_nb : ModelKind::multinomial_nb;
}

Distribution NaiveBayesModel::predict(std::string_view text) const {
  return predict_counts(vectorize(text, vocab_));
}

Distribution NaiveBayesModel::predict_counts(const CountVector& counts) const {
  const auto k = static_cast<Eigen::Index>(log_priors_.size());
  Eigen::VectorXd jll(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double s = log_priors_[static_cast<std::size_t>(c)];
    if (variant_ == NbVariant::multinomial) {
      for (const auto& [col, n] : counts.entries) s += static_cast<double>(n) * feature_log_prob_(c, col);
    } else {
      s += log_neg_sum_[c];
      for (const auto& [col, n] : counts.entries) {
        s += feature_log_prob_(c, col) - feature_log_neg_(c, col);
      }
    }
    jll[c] = s;
  }
  return normalize_log(jll);
}

nlohmann::json NaiveBayesModel::to_json() const {
  nlohmann::json j;
  j["variant"] = variant_ == NbVariant::bernoulli ? "bernoulli" : "multinomial";
  j["smoothing"] = smoothing_;
  j["log_priors"] = log_priors_;
  auto rows = nlohmann::json::array();
  for (Eigen::Index c = 0; c < feature_log_prob_.rows(); ++c) {
    std::vector<double> row(feature_log_prob_.row(c).begin(), feature_log_prob_.row(c).end());
    rows.push_back(std::move(row));
  }
  j["feature_log_prob"] = std::move(rows);
  return j;
}

NaiveBayesModel NaiveBayesModel::from_json(const nlohmann::json& j, Vocabulary vocab) {
  const auto variant = j.at("variant").get<std::string>() == "bernoulli" ? NbVariant::bernoulli
                                                                         : NbVariant::multinomial;
  auto labels = j.at("labels").get<std::vector<std::string>>();
  auto log_priors = j.at("log_priors").get<std::vector<double>>();
  const auto& rows = j.at("feature_log_prob");
  if (rows.size() != labels.size() || log_priors.size() != labels.size()) {
    throw ModelError("naive Bayes parameters do not match label count");
  }
  Eigen::MatrixXd flp(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto row = rows[c].get<std::vector<double>>();
    if (row.size() != vocab.size()) throw ModelError("naive Bayes table width does not match vocabulary");
    for (std::size_t t = 0; t < row.size(); ++t) {
      flp(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = row[t];
    }
  }
  return NaiveBayesModel(std::move(labels), std::move(vocab), variant, j.at("smoothing").get<double>(),
                         std::move(log_priors), std::move(flp));
}

}  // namespace stressmcts
