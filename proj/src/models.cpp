#include "stressmcts/models.hpp"

#include <algorithm>
#include <cmath>

namespace stressmcts {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::bernoulli_nb:
      return "bernoulli_nb";
    case ModelKind::multinomial_nb:
      return "multinomial_nb";
    case ModelKind::mlp:
      return "mlp";
    case ModelKind::external:
      return "external";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "bnb" || name == "bernoulli_nb") return ModelKind::bernoulli_nb;
  if (name == "mnb" || name == "multinomial_nb") return ModelKind::multinomial_nb;
  if (name == "mlp") return ModelKind::mlp;
  if (name == "external") return ModelKind::external;
  throw InvalidArgument("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(Target target) {
  return target == Target::stress ? "stress" : "context";
}

Target target_from_string(std::string_view name) {
  if (name == "stress") return Target::stress;
  if (name == "context") return Target::context;
  throw InvalidArgument("unknown target '" + std::string(name) + "'");
}

std::vector<std::string> target_labels(const Corpus& corpus, Target target) {
  if (target == Target::stress) return {"0", "1"};
  return corpus.context_universe;
}

std::string target_label(const Document& doc, Target target) {
  return target == Target::stress ? std::to_string(doc.stress) : doc.context;
}

ProbModel::ProbModel(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw ModelError("a model needs at least two labels");
}

std::vector<Distribution> ProbModel::predict_batch(std::span<const std::string> texts) const {
  std::vector<Distribution> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(predict(t));
  return out;
}

std::size_t ProbModel::label_index(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw ModelError("label '" + std::string(label) + "' not in model");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string ProbModel::predict_label(std::string_view text) const {
  const auto dist = predict(text);
  const auto best = std::max_element(dist.begin(), dist.end()) - dist.begin();
  return labels_[static_cast<std::size_t>(best)];
}

double prediction_entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace stressmcts
