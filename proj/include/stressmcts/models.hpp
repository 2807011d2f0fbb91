#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "stressmcts/corpus.hpp"
#include "stressmcts/textfeat.hpp"

namespace stressmcts {

using Distribution = std::vector<double>;

enum class ModelKind { bernoulli_nb, multinomial_nb, mlp, external };
enum class Target { stress, context };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);
std::string_view to_string(Target target);
Target target_from_string(std::string_view name);

// Label universe for a target: {"0","1"} for stress, the corpus context
// universe for context.
std::vector<std::string> target_labels(const Corpus& corpus, Target target);
std::string target_label(const Document& doc, Target target);

// A trained classifier mapping text to a probability distribution over
// labels(). Implementations are immutable after construction and safe for
// concurrent predict calls.
class ProbModel {
 public:
  virtual ~ProbModel() = default;

  virtual ModelKind kind() const = 0;
  virtual Distribution predict(std::string_view text) const = 0;
  virtual std::vector<Distribution> predict_batch(std::span<const std::string> texts) const;

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t label_index(std::string_view label) const;
  std::string predict_label(std::string_view text) const;

 protected:
  explicit ProbModel(std::vector<std::string> labels);

 private:
  std::vector<std::string> labels_;
};

// Shannon entropy in nats, with 0 ln 0 = 0.
double prediction_entropy(std::span<const double> dist);

// ---------------------------------------------------------------------------
// Naive Bayes

enum class NbVariant { bernoulli, multinomial };

class NaiveBayesModel final : public ProbModel {
 public:
  // Fits the vocabulary on `corpus` and then the class-conditional tables.
  static NaiveBayesModel train(const Corpus& corpus, Target target, NbVariant variant,
                               double smoothing = 1.0);
  static NaiveBayesModel train(const std::vector<CountVector>& rows, const std::vector<std::size_t>& y,
                               std::vector<std::string> labels, Vocabulary vocab, NbVariant variant,
                               double smoothing = 1.0);

  ModelKind kind() const override;
  Distribution predict(std::string_view text) const override;
  Distribution predict_counts(const CountVector& counts) const;

  NbVariant variant() const { return variant_; }
  double smoothing() const { return smoothing_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<double>& log_priors() const { return log_priors_; }
  // Row c holds log P(term | class c) (multinomial) or log P(present | c)
  // (bernoulli).
  const Eigen::MatrixXd& feature_log_prob() const { return feature_log_prob_; }

  nlohmann::json to_json() const;
  static NaiveBayesModel from_json(const nlohmann::json& j, Vocabulary vocab);

 private:
  NaiveBayesModel(std::vector<std::string> labels, Vocabulary vocab, NbVariant variant,
                  double smoothing, std::vector<double> log_priors, Eigen::MatrixXd feature_log_prob);
  void precompute();

  Vocabulary vocab_;
  NbVariant variant_;
  double smoothing_;
  std::vector<double> log_priors_;
  Eigen::MatrixXd feature_log_prob_;
  // Bernoulli only: log(1 - p) table and its per-class row sums.
  Eigen::MatrixXd feature_log_neg_;
  Eigen::VectorXd log_neg_sum_;
};

// ---------------------------------------------------------------------------
// Multilayer perceptron

struct MlpConfig {
  std::vector<int> hidden_sizes{100};
  double learning_rate = 1e-3;
  int max_epochs = 200;
  int patience = 10;
  double validation_fraction = 0.1;
  int batch_size = 32;
  double l2 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

// Fully connected ReLU network with a softmax output. The first layer takes
// sparse count vectors.
struct MlpNetwork {
  // weights[l] is (fan_out x fan_in); biases[l] has fan_out entries.
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpNetwork initialize(std::size_t inputs, const std::vector<int>& hidden, std::size_t outputs,
                               std::uint64_t seed);
  MlpNetwork zeros_like() const;
  std::size_t parameter_count() const;

  Eigen::VectorXd forward(const CountVector& x) const;

  // Mean cross-entropy over the batch plus l2 / (2 n) * sum of squared
  // weights. When `grad` is non-null it receives the gradient (same shape).
  double loss(std::span<const CountVector> xs, std::span<const std::size_t> ys, double l2,
              MlpNetwork* grad = nullptr) const;
};

class MlpModel final : public ProbModel {
 public:
  static MlpModel train(const Corpus& corpus, Target target, const MlpConfig& config = {});
  static MlpModel train(const std::vector<CountVector>& rows, const std::vector<std::size_t>& y,
                        std::vector<std::string> labels, Vocabulary vocab, const MlpConfig& config);

  ModelKind kind() const override { return ModelKind::mlp; }
  Distribution predict(std::string_view text) const override;
  Distribution predict_counts(const CountVector& counts) const;

  const Vocabulary& vocab() const { return vocab_; }
  const MlpNetwork& network() const { return network_; }
  int epochs_run() const { return epochs_run_; }

  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& j, Vocabulary vocab);

 private:
  MlpModel(std::vector<std::string> labels, Vocabulary vocab, MlpNetwork network, int epochs_run);

  Vocabulary vocab_;
  MlpNetwork network_;
  int epochs_run_ = 0;
};

// ---------------------------------------------------------------------------
// External scorer (newline-delimited JSON over a pipe or stream socket)

inline constexpr int kScorerProtocolVersion = 1;

struct ScorerOptions {
  std::chrono::milliseconds timeout{30'000};
  double normalization_tolerance = 1e-6;
};

class ScorerTransport {
 public:
  virtual ~ScorerTransport() = default;
  virtual void write_line(const std::string& line) = 0;
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

class ExternalScorerModel final : public ProbModel {
 public:
  ExternalScorerModel(std::unique_ptr<ScorerTransport> transport, std::vector<std::string> labels,
                      ScorerOptions options);
  ~ExternalScorerModel() override;

  ModelKind kind() const override { return ModelKind::external; }
  Distribution predict(std::string_view text) const override;
  std::vector<Distribution> predict_batch(std::span<const std::string> texts) const override;

  std::uint64_t requests_sent() const;

 private:
  std::unique_ptr<ScorerTransport> transport_;
  ScorerOptions options_;
  mutable std::mutex mutex_;
  mutable std::int64_t next_id_ = 1;
  mutable std::uint64_t requests_ = 0;
};

// `endpoint` is either "tcp://host:port", "unix:///path/to/socket", or a
// shell command whose stdin/stdout speak the protocol. An empty `labels`
// adopts whatever the scorer announces; otherwise the announced labels must
// match exactly.
std::unique_ptr<ExternalScorerModel> open_scorer(const std::string& endpoint,
                                                 std::vector<std::string> labels,
                                                 const ScorerOptions& options = {});

// Performs the hello exchange on an already-connected transport.
std::unique_ptr<ExternalScorerModel> open_scorer(std::unique_ptr<ScorerTransport> transport,
                                                 std::vector<std::string> labels,
                                                 const ScorerOptions& options = {});

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int kModelFormatVersion = 1;

// Writes `<path>` (JSON) and a sibling vocabulary file `<stem>.vocab.txt`.
void save_model(const ProbModel& model, const std::filesystem::path& path);
std::unique_ptr<ProbModel> load_model(const std::filesystem::path& path);

}  // namespace stressmcts
