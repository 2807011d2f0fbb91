#include "stressmcts/explain.hpp"

#include <algorithm>

namespace stressmcts {

namespace {

std::size_t stress_label_index(const ProbModel& model) { return model.label_index("1"); }

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

}  // namespace

Explanation::Explanation(const Document& doc, SpanList spans) : doc_(&doc), spans_(std::move(spans)) {
  std::sort(spans_.begin(), spans_.end());
  const std::size_t n = doc.display_tokens.size();
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    const auto& s = spans_[i];
    if (s.length == 0) throw InvalidArgument("phrase span has zero length");
    if (s.end() > n) throw InvalidArgument("phrase span exceeds document length");
    if (i > 0 && spans_[i - 1].end() > s.start) throw InvalidArgument("phrase spans overlap");
  }
}

Explanation Explanation::root(const Document& doc) {
  if (doc.display_tokens.empty()) throw InvalidArgument("document has no tokens");
  return Explanation(doc, {PhraseSpan{0, doc.display_tokens.size()}});
}

std::size_t Explanation::token_count() const {
  std::size_t total = 0;
  for (const auto& s : spans_) total += s.length;
  return total;
}

void Constraints::validate() const {
  if (n_phrases_max < 1) throw InvalidArgument("n_phrases_max must be at least 1");
  if (n_length_min < 1) throw InvalidArgument("n_length_min must be at least 1");
  if (!(0.0 <= r_min && r_min <= r_max && r_max <= 1.0)) {
    throw InvalidArgument("coverage bounds must satisfy 0 <= r_min <= r_max <= 1");
  }
}

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::phrase_count:
      return "phrase_count";
    case Violation::phrase_length:
      return "phrase_length";
    case Violation::coverage_low:
      return "coverage_low";
    case Violation::coverage_high:
      return "coverage_high";
  }
  return "unknown";
}

std::string_view to_string(Direction d) { return d == Direction::dependent ? "dependent" : "independent"; }

void RewardConfig::validate() const {
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  if (!stress_model || !context_model) throw InvalidArgument("reward needs both a stress and a context model");
  const auto& labels = stress_model->labels();
  if (labels.size() != 2 || std::find(labels.begin(), labels.end(), "0") == labels.end() ||
      std::find(labels.begin(), labels.end(), "1") == labels.end()) {
    throw InvalidArgument("stress model must have labels {0, 1}");
  }
}

std::string phrase_text(const Document& doc, PhraseSpan span) {
  if (span.length == 0 || span.end() > doc.display_tokens.size()) {
    throw InvalidArgument("phrase span out of range");
  }
  std::string out;
  for (std::size_t i = span.start; i < span.end(); ++i) {
    if (i > span.start) out.push_back(' ');
    out += doc.display_tokens[i];
  }
  return out;
}

double proportion_r(std::span<const PhraseSpan> spans, std::size_t doc_tokens) {
  std::size_t total = 0;
  for (const auto& s : spans) total += s.length;
  return static_cast<double>(total) / static_cast<double>(doc_tokens);
}

double proportion_r(const Explanation& expl) {
  return proportion_r(expl.spans(), expl.doc().display_tokens.size());
}

std::vector<Violation> check_constraints(std::span<const PhraseSpan> spans, std::size_t doc_tokens,
                                         const Constraints& c) {
  std::vector<Violation> out;
  if (spans.size() > c.n_phrases_max) out.push_back(Violation::phrase_count);
  if (std::any_of(spans.begin(), spans.end(), [&](const PhraseSpan& s) { return s.length < c.n_length_min; })) {
    out.push_back(Violation::phrase_length);
  }
  const double r = proportion_r(spans, doc_tokens);
  if (r < c.r_min) out.push_back(Violation::coverage_low);
  if (r > c.r_max) out.push_back(Violation::coverage_high);
  return out;
}

std::vector<Violation> check_constraints(const Explanation& expl, const Constraints& c) {
  return check_constraints(expl.spans(), expl.doc().display_tokens.size(), c);
}

double stress_S(const Explanation& expl, const ProbModel& stress_model) {
  if (expl.spans().empty()) throw InvalidArgument("stress of an empty explanation is undefined");
  const std::size_t idx = stress_label_index(stress_model);
  double sum = 0.0;
  for (const auto& s : expl.spans()) sum += stress_model.predict(phrase_text(expl.doc(), s))[idx];
  return sum / static_cast<double>(expl.spans().size());
}

double entropy_H(const Explanation& expl, const ProbModel& context_model) {
  if (expl.spans().empty()) throw InvalidArgument("entropy of an empty explanation is undefined");
  double sum = 0.0;
  for (const auto& s : expl.spans()) sum += prediction_entropy(context_model.predict(phrase_text(expl.doc(), s)));
  return sum / static_cast<double>(expl.spans().size());
}

double reward_R(const Explanation& expl, const RewardConfig& cfg) {
  const double sign = static_cast<double>(static_cast<int>(cfg.direction));
  return stress_S(expl, *cfg.stress_model) + sign * cfg.alpha * entropy_H(expl, *cfg.context_model);
}

ExplanationScorer::ExplanationScorer(const Document& doc, const RewardConfig& cfg)
    : doc_(&doc), cfg_(cfg), stress_index_(0) {
  cfg_.validate();
  stress_index_ = stress_label_index(*cfg_.stress_model);
}

const ExplanationScorer::PhraseScore& ExplanationScorer::phrase(PhraseSpan span) {
  const std::uint64_t key = static_cast<std::uint64_t>(span.start) << 32 | static_cast<std::uint64_t>(span.length);
  if (auto it = cache_.find(key); it != cache_.end()) {
    ++hits_;
    return it->second;
  }
  ++misses_;
  const std::string text = phrase_text(*doc_, span);
  PhraseScore score{cfg_.stress_model->predict(text)[stress_index_],
                    prediction_entropy(cfg_.context_model->predict(text))};
  return cache_.emplace(key, score).first->second;
}

ExplanationScores ExplanationScorer::score(std::span<const PhraseSpan> spans) {
  if (spans.empty()) throw InvalidArgument("cannot score an empty explanation");
  ExplanationScores out;
  for (const auto& s : spans) {
    const auto& p = phrase(s);
    out.S += p.stress;
    out.H += p.entropy;
  }
  const auto k = static_cast<double>(spans.size());
  out.S /= k;
  out.H /= k;
  out.R = out.S + static_cast<double>(static_cast<int>(cfg_.direction)) * cfg_.alpha * out.H;
  out.r = proportion_r(spans, doc_->display_tokens.size());
  return out;
}

nlohmann::json explanation_json(const Explanation& expl, const ExplanationScores& scores) {
  auto spans = nlohmann::json::array();
  auto phrases = nlohmann::json::array();
  for (const auto& s : expl.spans()) {
    spans.push_back({{"start", s.start}, {"length", s.length}});
    phrases.push_back(phrase_text(expl.doc(), s));
  }
  return {{"doc_id", expl.doc().id}, {"spans", std::move(spans)}, {"phrases", std::move(phrases)},
          {"S", scores.S},           {"H", scores.H},             {"R", scores.R},
          {"r", scores.r}};
}

std::string render_explanation(const Explanation& expl, RenderStyle style) {
  const auto& tokens = expl.doc().display_tokens;
  std::vector<bool> on(tokens.size(), false);
  for (const auto& s : expl.spans()) std::fill(on.begin() + static_cast<std::ptrdiff_t>(s.start),
                                               on.begin() + static_cast<std::ptrdiff_t>(s.end()), true);

  std::string open;
  std::string close;
  switch (style) {
    case RenderStyle::plain:
      open = "[";
      close = "]";
      break;
    case RenderStyle::ansi:
      open = "\x1b[1;31m";
      close = "\x1b[0m";
      break;
    case RenderStyle::html:
      open = "<mark>";
      close = "</mark>";
      break;
  }

  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool starts = on[i] && (i == 0 || !on[i - 1]);
    const bool ends = on[i] && (i + 1 == tokens.size() || !on[i + 1]);
    if (i > 0) out.push_back(' ');
    if (starts) out += open;
    out += style == RenderStyle::html ? html_escape(tokens[i]) : tokens[i];
    if (ends) out += close;
  }
  return out;
}

}  // namespace stressmcts
