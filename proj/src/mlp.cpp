#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "stressmcts/models.hpp"

namespace stressmcts {

namespace {

Eigen::VectorXd relu(const Eigen::VectorXd& z) { return z.cwiseMax(0.0); }

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

template <typename Rng>
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  // Fisher-Yates with an explicit draw so the permutation depends only on
  // the generator, not on the standard library's shuffle.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

MlpNetwork MlpNetwork::initialize(std::size_t inputs, const std::vector<int>& hidden, std::size_t outputs,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> sizes{inputs};
  for (int h : hidden) sizes.push_back(static_cast<std::size_t>(h));
  sizes.push_back(outputs);

  MlpNetwork net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(sizes[l + 1]);
    // Glorot uniform.
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c) {
      for (Eigen::Index r = 0; r < fan_out; ++r) w(r, c) = dist(rng);
    }
    Eigen::VectorXd b(fan_out);
    for (Eigen::Index r = 0; r < fan_out; ++r) b[r] = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

MlpNetwork MlpNetwork::zeros_like() const {
  MlpNetwork z;
  for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return z;
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

Eigen::VectorXd MlpNetwork::forward(const CountVector& x) const {
  Eigen::VectorXd z = biases[0];
  for (const auto& [col, n] : x.entries) z += static_cast<double>(n) * weights[0].col(col);
  for (std::size_t l = 1; l < weights.size(); ++l) z = weights[l] * relu(z) + biases[l];
  return softmax(z);
}

double MlpNetwork::loss(std::span<const CountVector> xs, std::span<const std::size_t> ys, double l2,
                        MlpNetwork* grad) const {
  const std::size_t layers = weights.size();
  const auto n = static_cast<double>(xs.size());
  double total = 0.0;

  std::vector<Eigen::VectorXd> pre(layers);
  std::vector<Eigen::VectorXd> act(layers);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    pre[0] = biases[0];
    for (const auto& [col, cnt] : xs[i].entries) pre[0] += static_cast<double>(cnt) * weights[0].col(col);
    for (std::size_t l = 1; l < layers; ++l) {
      act[l - 1] = relu(pre[l - 1]);
      pre[l] = weights[l] * act[l - 1] + biases[l];
    }
    const Eigen::VectorXd& logits = pre[layers - 1];
    const auto y = static_cast<Eigen::Index>(ys[i]);
    total += log_sum_exp(logits) - logits[y];

    if (grad == nullptr) continue;
    Eigen::VectorXd delta = softmax(logits);
    delta[y] -= 1.0;
    delta /= n;
    for (std::size_t l = layers - 1; l >= 1; --l) {
      grad->weights[l].noalias() += delta * act[l - 1].transpose();
      grad->biases[l] += delta;
      Eigen::VectorXd back = weights[l].transpose() * delta;
      delta = (pre[l - 1].array() > 0.0).select(back.array(), 0.0).matrix();
    }
    for (const auto& [col, cnt] : xs[i].entries) grad->weights[0].col(col) += static_cast<double>(cnt) * delta;
    grad->biases[0] += delta;
  }

  double penalty = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    penalty += weights[l].squaredNorm();
    if (grad != nullptr) grad->weights[l] += (l2 / n) * weights[l];
  }
  return total / n + l2 / (2.0 * n) * penalty;
}

MlpModel::MlpModel(std::vector<std::string> labels, Vocabulary vocab, MlpNetwork network, int epochs_run)
    : ProbModel(std::move(labels)),
      vocab_(std::move(vocab)),
      network_(std::move(network)),
      epochs_run_(epochs_run) {}

MlpModel MlpModel::train(const Corpus& corpus, Target target, const MlpConfig& config) {
  if (corpus.empty()) throw InvalidArgument("cannot train on an empty corpus");
  Vocabulary vocab = fit_vocabulary(corpus);
  auto labels = target_labels(corpus, target);
  std::vector<CountVector> rows;
  std::vector<std::size_t> y;
  for (const auto& doc : corpus.documents) {
    rows.push_back(vectorize(doc.raw_text, vocab));
    const auto label = target_label(doc, target);
    y.push_back(static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin()));
  }
  return train(rows, y, std::move(labels), std::move(vocab), config);
}

MlpModel MlpModel::train(const std::vector<CountVector>& rows, const std::vector<std::size_t>& y,
                         std::vector<std::string> labels, Vocabulary vocab, const MlpConfig& config) {
  if (config.hidden_sizes.empty() ||
      std::any_of(config.hidden_sizes.begin(), config.hidden_sizes.end(), [](int h) { return h <= 0; })) {
    throw InvalidArgument("MLP hidden layer sizes must be positive");
  }
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("MLP learning rate must be positive");
  if (config.batch_size <= 0 || config.max_epochs <= 0) throw InvalidArgument("MLP batch size and epochs must be positive");
  if (rows.empty() || rows.size() != y.size()) throw InvalidArgument("rows and labels must be non-empty and aligned");
  if (vocab.empty()) throw InvalidArgument("empty vocabulary");
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (std::find(y.begin(), y.end(), c) == y.end()) {
      throw InvalidArgument("class '" + labels[c] + "' has no training documents");
    }
  }

  std::mt19937_64 rng(config.seed);
  MlpNetwork net = MlpNetwork::initialize(vocab.size(), config.hidden_sizes, labels.size(), rng());

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, rng);
  auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(rows.size())));
  if (n_val < 1 || n_val >= rows.size()) n_val = 0;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  auto gather = [&](const std::vector<std::size_t>& idx, std::size_t from, std::size_t to,
                    std::vector<CountVector>& xs, std::vector<std::size_t>& ys) {
    xs.clear();
    ys.clear();
    for (std::size_t k = from; k < to; ++k) {
      xs.push_back(rows[idx[k]]);
      ys.push_back(y[idx[k]]);
    }
  };
  std::vector<CountVector> val_x;
  std::vector<std::size_t> val_y;
  gather(val_idx, 0, val_idx.size(), val_x, val_y);

  MlpNetwork m = net.zeros_like();
  MlpNetwork v = net.zeros_like();
  MlpNetwork grad = net.zeros_like();
  MlpNetwork best = net;
  double best_score = std::numeric_limits<double>::infinity();
  int stale = 0;
  long step = 0;
  int epoch = 0;

  std::vector<CountVector> bx;
  std::vector<std::size_t> by;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_indices(train_idx, rng);
    double epoch_loss = 0.0;
    for (std::size_t from = 0; from < train_idx.size(); from += batch) {
      const std::size_t to = std::min(from + batch, train_idx.size());
      gather(train_idx, from, to, bx, by);
      for (auto& w : grad.weights) w.setZero();
      for (auto& b : grad.biases) b.setZero();
      const double l = net.loss(bx, by, config.l2, &grad);
      if (!std::isfinite(l)) {
        throw ModelError("MLP training produced a non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += l * static_cast<double>(to - from);

      ++step;
      const double lr = config.learning_rate * std::sqrt(1.0 - std::pow(config.beta2, step)) /
                        (1.0 - std::pow(config.beta1, step));
      auto adam = [&](auto& param, auto& mom, auto& vel, const auto& g) {
        mom = config.beta1 * mom + (1.0 - config.beta1) * g;
        vel = config.beta2 * vel + (1.0 - config.beta2) * g.cwiseAbs2();
        param.array() -= lr * mom.array() / (vel.array().sqrt() + config.epsilon);
      };
      for (std::size_t l2i = 0; l2i < net.weights.size(); ++l2i) {
        adam(net.weights[l2i], m.weights[l2i], v.weights[l2i], grad.weights[l2i]);
        adam(net.biases[l2i], m.biases[l2i], v.biases[l2i], grad.biases[l2i]);
      }
    }
    epoch_loss /= static_cast<double>(train_idx.size());

    // Early stopping monitors held-out loss when a validation slice exists,
    // otherwise the training loss.
    const double score = n_val > 0 ? net.loss(val_x, val_y, 0.0) : epoch_loss;
    if (!std::isfinite(score)) {
      throw ModelError("MLP training produced a non-finite loss at epoch " + std::to_string(epoch));
    }
    if (score < best_score - config.tolerance) {
      best_score = score;
      best = net;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  const int epochs_run = std::min(epoch, config.max_epochs);
  if (n_val > 0) net = std::move(best);
  return MlpModel(std::move(labels), std::move(vocab), std::move(net), epochs_run);
}

Distribution MlpModel::predict(std::string_view text) const { return predict_counts(vectorize(text, vocab_)); }

Distribution MlpModel::predict_counts(const CountVector& counts) const {
  const Eigen::VectorXd p = network_.forward(counts);
  Distribution out(p.data(), p.data() + p.size());
  return out;
}

nlohmann::json MlpModel::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < network_.weights.size(); ++l) {
    const auto& w = network_.weights[l];
    const auto& b = network_.biases[l];
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weights", std::vector<double>(w.data(), w.data() + w.size())},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layers", std::move(layers)}, {"epochs_run", epochs_run_}};
}

MlpModel MlpModel::from_json(const nlohmann::json& j, Vocabulary vocab) {
  MlpNetwork net;
  for (const auto& layer : j.at("layers")) {
    const auto rows = layer.at("rows").get<Eigen::Index>();
    const auto cols = layer.at("cols").get<Eigen::Index>();
    const auto w = layer.at("weights").get<std::vector<double>>();
    const auto b = layer.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
      throw ModelError("MLP layer shape mismatch");
    }
    net.weights.push_back(Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols));
    net.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
  }
  if (net.weights.empty() || net.weights.front().cols() != static_cast<Eigen::Index>(vocab.size())) {
    throw ModelError("MLP input width does not match vocabulary");
  }
  auto labels = j.at("labels").get<std::vector<std::string>>();
  if (net.weights.back().rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ModelError("MLP output width does not match label count");
  }
  return MlpModel(std::move(labels), std::move(vocab), std::move(net), j.value("epochs_run", 0));
}

}  // namespace stressmcts
