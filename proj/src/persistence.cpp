#include <fstream>

#include "stressmcts/models.hpp"

namespace stressmcts {

void save_model(const ProbModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  const Vocabulary* vocab = nullptr;
  if (const auto* nb = dynamic_cast<const NaiveBayesModel*>(&model)) {
    j = nb->to_json();
    vocab = &nb->vocab();
  } else if (const auto* mlp = dynamic_cast<const MlpModel*>(&model)) {
    j = mlp->to_json();
    vocab = &mlp->vocab();
  } else {
    throw ModelError("only naive Bayes and MLP models can be saved");
  }

  auto vocab_path = path;
  vocab_path.replace_extension(".vocab.txt");
  vocab->save(vocab_path);

  j["format_version"] = kModelFormatVersion;
  j["kind"] = std::string(to_string(model.kind()));
  j["labels"] = model.labels();
  j["vocab_file"] = vocab_path.filename().string();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file '" + path.string() + "'");
  out << j.dump() << '\n';
}

std::unique_ptr<ProbModel> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read model file '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ModelError("model file '" + path.string() + "' is not valid JSON");
  if (j.value("format_version", 0) != kModelFormatVersion) {
    throw ModelError("unsupported model format version in '" + path.string() + "'");
  }
  Vocabulary vocab = Vocabulary::load(path.parent_path() / j.at("vocab_file").get<std::string>());
  const auto kind = model_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case ModelKind::bernoulli_nb:
    case ModelKind::multinomial_nb:
      return std::make_unique<NaiveBayesModel>(NaiveBayesModel::from_json(j, std::move(vocab)));
    case ModelKind::mlp:
      return std::make_unique<MlpModel>(MlpModel::from_json(j, std::move(vocab)));
    case ModelKind::external:
      break;
  }
  throw ModelError("model file '" + path.string() + "' has an unloadable kind");
}

}  // namespace stressmcts
