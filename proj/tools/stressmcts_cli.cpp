// stressmcts: train classifiers, explain texts, run explanation experiments.
//
// Exit codes: 0 success, 1 partial report (some documents failed), 2 error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "stressmcts/harness.hpp"

using namespace stressmcts;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitError = 2;

struct DataArgs {
  std::string train;
  std::string test;
  CsvColumns columns;
  std::vector<std::string> contexts{"anxiety", "assistance", "relationships"};
  bool stressed_only = false;
  bool lenient = false;
};

struct ModelArgs {
  std::string model = "mnb";
  std::string scorer_cmd;
  std::string stress_scorer_cmd;
  std::string context_scorer_cmd;
  std::string stress_model_file;
  std::string context_model_file;
  std::vector<int> hidden{100};
  std::uint64_t mlp_seed = 0;
  int scorer_timeout_ms = 30000;
};

struct SearchArgs {
  int iterations = 2000;
  double c_puct = 1.0;
  std::uint64_t seed = 0;
  std::size_t n_phrases = 3;
  std::size_t n_length = 5;
  double r_min = 0.2;
  double r_max = 0.5;
  bool plain_tree = false;
};

void add_data_options(CLI::App* cmd, DataArgs& d, bool need_train, bool need_test) {
  auto* tr = cmd->add_option("--train", d.train, "training CSV")->check(CLI::ExistingFile);
  if (need_train) tr->required();
  if (need_test) cmd->add_option("--test", d.test, "test CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--text-col", d.columns.text, "text column")->capture_default_str();
  cmd->add_option("--stress-col", d.columns.stress, "binary stress label column")->capture_default_str();
  cmd->add_option("--context-col", d.columns.context, "context (subreddit) column")->capture_default_str();
  cmd->add_option("--contexts", d.contexts, "context labels kept for the context classifier")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_flag("--lenient-labels", d.lenient, "accept -1 as the negative stress label");
}

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--model", m.model, "classifier family")
      ->check(CLI::IsMember({"bnb", "mnb", "mlp", "external"}))
      ->capture_default_str();
  cmd->add_option("--scorer-cmd", m.scorer_cmd,
                  "external scorer command (\"--labels ...\" is appended) or unix:// / tcp:// endpoint");
  cmd->add_option("--stress-scorer-cmd", m.stress_scorer_cmd, "external scorer for stress only");
  cmd->add_option("--context-scorer-cmd", m.context_scorer_cmd, "external scorer for context only");
  cmd->add_option("--scorer-timeout-ms", m.scorer_timeout_ms, "per-request scorer timeout")->capture_default_str();
  cmd->add_option("--stress-model", m.stress_model_file, "load the stress model from a file instead of training")
      ->check(CLI::ExistingFile);
  cmd->add_option("--context-model", m.context_model_file, "load the context model from a file instead of training")
      ->check(CLI::ExistingFile);
  cmd->add_option("--hidden", m.hidden, "MLP hidden layer sizes")->delimiter(',')->capture_default_str();
  cmd->add_option("--mlp-seed", m.mlp_seed, "MLP initialization and shuffling seed")->capture_default_str();
}

void add_search_options(CLI::App* cmd, SearchArgs& s) {
  cmd->add_option("--iterations", s.iterations, "MCTS simulations per explanation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--c-puct", s.c_puct, "exploration constant")->capture_default_str();
  cmd->add_option("--seed", s.seed, "search seed")->capture_default_str();
  cmd->add_option("--n-phrases", s.n_phrases, "maximum number of phrases")->capture_default_str();
  cmd->add_option("--n-length", s.n_length, "minimum phrase length in tokens")->capture_default_str();
  cmd->add_option("--r-min", s.r_min, "minimum token proportion")->capture_default_str();
  cmd->add_option("--r-max", s.r_max, "maximum token proportion")->capture_default_str();
  cmd->add_flag("--plain-tree", s.plain_tree, "disable node sharing and exhausted-subtree pruning");
}

Corpus load(const std::string& path, const DataArgs& d, Split split) {
  LoadOptions opt;
  opt.columns = d.columns;
  opt.split = split;
  opt.lenient_stress = d.lenient;
  return load_corpus(path, opt);
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out.push_back(sep);
    out += s;
  }
  return out;
}

bool is_endpoint(const std::string& cmd) { return cmd.rfind("unix://", 0) == 0 || cmd.rfind("tcp://", 0) == 0; }

std::shared_ptr<const ProbModel> open_external(const std::string& cmd, const std::vector<std::string>& labels,
                                               const ModelArgs& m) {
  if (cmd.empty()) throw InvalidArgument("--model external needs --scorer-cmd (or a per-target scorer command)");
  const std::string endpoint = is_endpoint(cmd) ? cmd : cmd + " --labels " + join(labels, ',');
  ScorerOptions opt;
  opt.timeout = std::chrono::milliseconds(m.scorer_timeout_ms);
  return open_scorer(endpoint, labels, opt);
}

// Loads, trains or connects the model for `target`. `train` may be empty when
// the model comes from a file or an external scorer.
std::shared_ptr<const ProbModel> obtain_model(Target target, const ModelArgs& m, const DataArgs& d,
                                              const Corpus* train) {
  const std::string& file = target == Target::stress ? m.stress_model_file : m.context_model_file;
  if (!file.empty()) return load_model(file);

  const std::vector<std::string> labels =
      target == Target::stress ? std::vector<std::string>{"0", "1"} : d.contexts;
  if (m.model == "external") {
    const std::string& own = target == Target::stress ? m.stress_scorer_cmd : m.context_scorer_cmd;
    return open_external(own.empty() ? m.scorer_cmd : own, labels, m);
  }
  if (train == nullptr) throw InvalidArgument("--train is required to fit a " + m.model + " model");
  const Corpus fit = target == Target::stress ? *train : filter_corpus(*train, d.contexts);
  if (m.model == "mlp") {
    MlpConfig cfg;
    cfg.hidden_sizes = m.hidden;
    cfg.seed = m.mlp_seed;
    return std::make_shared<MlpModel>(MlpModel::train(fit, target, cfg));
  }
  const auto variant = m.model == "bnb" ? NbVariant::bernoulli : NbVariant::multinomial;
  return std::make_shared<NaiveBayesModel>(NaiveBayesModel::train(fit, target, variant));
}

SearchConfig search_config(const SearchArgs& s) {
  SearchConfig cfg;
  cfg.iterations = s.iterations;
  cfg.c_puct = s.c_puct;
  cfg.seed = s.seed;
  cfg.constraints = Constraints{s.n_phrases, s.n_length, s.r_min, s.r_max};
  cfg.share_transpositions = !s.plain_tree;
  cfg.prune_exhausted = !s.plain_tree;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string alpha_tag(double alpha) {
  std::ostringstream out;
  out << alpha;
  return out.str();
}

// Writes the report JSON, the table and both histogram CSVs; returns whether
// the report is partial.
bool emit_report(const ExperimentReport& rep, const std::string& out_dir, std::size_t bins) {
  std::cout << render_table(rep);
  if (rep.partial()) std::cout << rep.failures.size() << " documents failed\n";
  for (const auto& f : rep.failures) std::cerr << "warning: " << f.doc_id << ": " << f.message << "\n";
  std::cout << "\n";

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const std::string stem = rep.model_name + "_alpha" + alpha_tag(rep.alpha);
    write_file(fs::path(out_dir) / ("report_" + stem + ".json"), to_json(rep).dump(2) + "\n");
    write_file(fs::path(out_dir) / ("table_" + stem + ".txt"), render_table(rep));
    write_file(fs::path(out_dir) / ("hist_stress_" + stem + ".csv"),
               histograms_csv(emit_histograms(rep, Quantity::stress, bins)));
    write_file(fs::path(out_dir) / ("hist_entropy_" + stem + ".csv"),
               histograms_csv(emit_histograms(rep, Quantity::entropy, bins)));
  }
  return rep.partial();
}

std::string sweep_csv(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  out << "model,alpha,documents,dependent_S,dependent_H,independent_S,independent_H,H_gap,p_value\n";
  for (const auto& r : reports) {
    const auto& a = r.aggregates;
    out << r.model_name << ',' << r.alpha << ',' << r.records.size() << ',' << a.dependent_S.mean << ','
        << a.dependent_H.mean << ',' << a.independent_S.mean << ',' << a.independent_H.mean << ','
        << a.independent_H.mean - a.dependent_H.mean << ',';
    if (r.wilcoxon) out << r.wilcoxon->p_value;
    out << '\n';
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware stress explanations with Monte Carlo tree search"};
  app.require_subcommand(1);

  DataArgs data;
  ModelArgs model;
  SearchArgs search;
  std::string out_dir;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t bins = 20;

  // train
  auto* train_cmd = app.add_subcommand("train", "fit a classifier and save it");
  std::string target_name = "stress";
  std::string model_out;
  add_data_options(train_cmd, data, true, false);
  add_model_options(train_cmd, model);
  train_cmd->add_option("--target", target_name, "what to predict")
      ->check(CLI::IsMember({"stress", "context"}))
      ->capture_default_str();
  train_cmd->add_option("-o,--output", model_out, "model file (JSON; vocabulary is written beside it)")->required();

  // eval-classifier
  auto* eval_cmd = app.add_subcommand("eval-classifier", "train on the train split, report test metrics");
  std::string eval_target = "both";
  add_data_options(eval_cmd, data, false, true);
  add_model_options(eval_cmd, model);
  eval_cmd->add_option("--target", eval_target, "which classifier to evaluate")
      ->check(CLI::IsMember({"stress", "context", "both"}))
      ->capture_default_str();
  eval_cmd->add_option("--out-dir", out_dir, "write metrics JSON here");

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "explain the stress prediction for one text");
  std::string text;
  std::string text_file;
  std::string direction = "both";
  double alpha = 10.0;
  std::string render = "ansi";
  add_data_options(explain_cmd, data, false, false);
  add_model_options(explain_cmd, model);
  add_search_options(explain_cmd, search);
  auto* text_opt = explain_cmd->add_option("--text", text, "text to explain");
  explain_cmd->add_option("--text-file", text_file, "read the text from a file")
      ->check(CLI::ExistingFile)
      ->excludes(text_opt);
  explain_cmd->add_option("--alpha", alpha, "entropy weight")->capture_default_str();
  explain_cmd->add_option("--direction", direction, "dep (context-dependent), ind, or both")
      ->check(CLI::IsMember({"dep", "ind", "both"}))
      ->capture_default_str();
  explain_cmd->add_option("--render", render, "highlighting style")
      ->check(CLI::IsMember({"ansi", "html", "plain", "none"}))
      ->capture_default_str();
  explain_cmd->add_option("--out-dir", out_dir, "also write explanation JSON and HTML here");

  // experiment / sweep-alpha
  auto* exp_cmd = app.add_subcommand("experiment", "explain every stressed test document and compare directions");
  auto* sweep_cmd = app.add_subcommand("sweep-alpha", "run the experiment for several alpha values");
  std::vector<double> alphas{0.1, 1.0, 10.0};
  for (auto* cmd : {exp_cmd, sweep_cmd}) {
    add_data_options(cmd, data, false, true);
    add_model_options(cmd, model);
    add_search_options(cmd, search);
    cmd->add_flag("--stressed-only,!--all-documents", data.stressed_only,
                  "explain only test documents labeled stressed (default on)");
    cmd->add_option("--workers", workers, "documents searched in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--out-dir", out_dir, "write reports, tables and histogram CSVs here");
    cmd->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  }
  exp_cmd->add_option("--alpha", alpha, "entropy weight")->capture_default_str();
  sweep_cmd->add_option("--alphas", alphas, "entropy weights")->delimiter(',')->capture_default_str();

  data.stressed_only = true;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*train_cmd) {
      const auto train = load(data.train, data, Split::train);
      const auto target = target_from_string(target_name);
      if (model.model == "external") throw InvalidArgument("external scorers cannot be trained here");
      const auto m = obtain_model(target, model, data, &train);
      save_model(*m, model_out);
      std::cout << "saved " << model.model << " " << target_name << " model with " << m->labels().size()
                << " labels to " << model_out << "\n";
      return kExitOk;
    }

    if (*eval_cmd) {
      std::optional<Corpus> train;
      if (!data.train.empty()) train = load(data.train, data, Split::train);
      const auto test = load(data.test, data, Split::test);
      nlohmann::json all;
      for (auto target : {Target::stress, Target::context}) {
        if (eval_target != "both" && eval_target != to_string(target)) continue;
        const auto m = obtain_model(target, model, data, train ? &*train : nullptr);
        const Corpus eval_set = target == Target::stress ? test : filter_corpus(test, data.contexts);
        const auto rep = evaluate_classifier(*m, eval_set, target);
        std::cout << to_string(target) << " (" << model.model << ", " << eval_set.size() << " test documents"
                  << (rep.macro ? ", macro-averaged" : "") << "): precision " << rep.precision << ", recall "
                  << rep.recall << ", F1 " << rep.f1 << ", accuracy " << rep.accuracy << "\n";
        if (rep.zero_division) std::cerr << "warning: a metric had a zero denominator and was reported as 0\n";
        all[std::string(to_string(target))] = to_json(rep);
      }
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / ("metrics_" + model.model + ".json"), all.dump(2) + "\n");
      }
      return kExitOk;
    }

    if (*explain_cmd) {
      if (!text_file.empty()) {
        std::ifstream in(text_file, std::ios::binary);
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      }
      if (split_whitespace(text).empty()) throw InvalidArgument("nothing to explain: give --text or --text-file");
      std::optional<Corpus> train;
      if (!data.train.empty()) train = load(data.train, data, Split::train);
      auto cfg = search_config(search);
      cfg.reward.alpha = alpha;
      cfg.reward.stress_model = obtain_model(Target::stress, model, data, train ? &*train : nullptr);
      cfg.reward.context_model = obtain_model(Target::context, model, data, train ? &*train : nullptr);
      const auto doc = make_document("input", text, 1, "");

      nlohmann::json out = nlohmann::json::object();
      std::string html;
      for (auto dir : {Direction::dependent, Direction::independent}) {
        const bool want = direction == "both" || (direction == "dep") == (dir == Direction::dependent);
        if (!want) continue;
        cfg.reward.direction = dir;
        const auto res = stressmcts::search(doc, cfg);
        auto j = explanation_json(res.best, res.scores);
        j["direction"] = to_string(dir);
        j["window"] = to_string(res.window);
        j["simulations"] = res.stats.simulations;
        out[std::string(to_string(dir))] = j;
        if (res.window == CoverageWindow::upper_only) {
          std::cerr << "warning: no " << to_string(dir) << " explanation reached r_min; reporting the best with r <= r_max\n";
        }
        if (render != "none") {
          const auto style = render == "html" ? RenderStyle::html : render == "plain" ? RenderStyle::plain : RenderStyle::ansi;
          std::cerr << to_string(dir) << " (S " << res.scores.S << ", H " << res.scores.H << ", r " << res.scores.r
                    << "): " << render_explanation(res.best, style) << "\n";
        }
        html += "<p><b>" + std::string(to_string(dir)) + "</b>: " + render_explanation(res.best, RenderStyle::html) +
                "</p>\n";
      }
      std::cout << out.dump(2) << "\n";
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "explanation.json", out.dump(2) + "\n");
        write_file(fs::path(out_dir) / "explanation.html", html);
      }
      return kExitOk;
    }

    // experiment or sweep-alpha
    std::optional<Corpus> train;
    if (!data.train.empty()) train = load(data.train, data, Split::train);
    const auto test = load(data.test, data, Split::test);
    const auto docs = filter_corpus(test, data.contexts, data.stressed_only ? std::optional<int>(1) : std::nullopt);
    ExperimentOptions opt;
    opt.search = search_config(search);
    opt.alphas = *exp_cmd ? std::vector<double>{alpha} : alphas;
    opt.workers = workers;
    opt.model_name = model.model;
    const auto stress = obtain_model(Target::stress, model, data, train ? &*train : nullptr);
    const auto context = obtain_model(Target::context, model, data, train ? &*train : nullptr);
    std::cout << "explaining " << docs.size() << " documents with " << model.model << ", " << search.iterations
              << " iterations, " << workers << " workers\n\n";
    const auto reports = run_experiment(docs, stress, context, opt);
    bool partial = false;
    for (const auto& rep : reports) partial = emit_report(rep, out_dir, bins) || partial;
    if (*sweep_cmd) {
      std::cout << sweep_csv(reports);
      if (!out_dir.empty()) write_file(fs::path(out_dir) / ("sweep_" + model.model + ".csv"), sweep_csv(reports));
    }
    return partial ? kExitPartial : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
