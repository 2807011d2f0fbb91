#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stressmcts/error.hpp"

namespace stressmcts {

enum class Split { train, test };

// One labeled post. display_tokens are the whitespace-delimited surface
// tokens that explanations index into.
struct Document {
  std::string id;
  std::string raw_text;
  std::vector<std::string> display_tokens;
  int stress = 0;
  std::string context;
};

struct Corpus {
  std::vector<Document> documents;
  Split split = Split::train;
  std::vector<std::string> context_universe;

  bool empty() const { return documents.empty(); }
  std::size_t size() const { return documents.size(); }
};

struct CsvColumns {
  std::string text = "text";
  std::string stress = "label";
  std::string context = "subreddit";
};

struct LoadOptions {
  CsvColumns columns;
  Split split = Split::train;
  // Accept "-1" as the negative stress label (some Dreaddit exports).
  bool lenient_stress = false;
};

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view text);

// Parses RFC 4180 CSV (quoted fields, doubled quotes, embedded newlines).
// Returns the header followed by data records.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

Document make_document(std::string id, std::string raw_text, int stress, std::string context);

// Context universe of a loaded corpus is the sorted set of distinct labels.
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});
Corpus corpus_from_csv(std::string_view content, const LoadOptions& options = {});

// Keeps documents whose context is in `contexts` (and whose stress equals
// `stress` when set). The result's context_universe is `contexts` in the
// order given.
Corpus filter_corpus(const Corpus& corpus, const std::vector<std::string>& contexts,
                     std::optional<int> stress = std::nullopt);

}  // namespace stressmcts
