#include "stressmcts/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace stressmcts {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw CorpusError("missing column '" + name + "' in CSV header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

int parse_stress(const std::string& value, bool lenient, std::size_t row) {
  const std::string v = trim(value);
  if (v == "0") return 0;
  if (v == "1") return 1;
  if (lenient && v == "-1") return 0;
  throw CorpusError("row " + std::to_string(row) + ": unparseable stress value '" + value + "'");
}

}  // namespace

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  if (content.size() >= 3 && content.substr(0, 3) == "\xEF\xBB\xBF") content.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A bare newline yields one empty field; skip such blank lines.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw CorpusError("unterminated quoted field at end of CSV");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

Document make_document(std::string id, std::string raw_text, int stress, std::string context) {
  Document doc;
  doc.id = std::move(id);
  doc.display_tokens = split_whitespace(raw_text);
  doc.raw_text = std::move(raw_text);
  doc.stress = stress;
  doc.context = std::move(context);
  return doc;
}

Corpus corpus_from_csv(std::string_view content, const LoadOptions& options) {
  const auto records = parse_csv(content);
  if (records.empty()) throw CorpusError("CSV has no header row");

  const auto& header = records.front();
  const std::size_t text_col = column_index(header, options.columns.text);
  const std::size_t stress_col = column_index(header, options.columns.stress);
  const std::size_t context_col = column_index(header, options.columns.context);
  const std::size_t needed = std::max({text_col, stress_col, context_col});

  Corpus corpus;
  corpus.split = options.split;
  std::set<std::string> contexts;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const std::size_t row = r - 1;
    const auto& rec = records[r];
    if (rec.size() <= needed) {
      throw CorpusError("row " + std::to_string(row) + ": expected at least " +
                        std::to_string(needed + 1) + " fields, found " + std::to_string(rec.size()));
    }
    const int stress = parse_stress(rec[stress_col], options.lenient_stress, row);
    Document doc = make_document("row-" + std::to_string(row), rec[text_col], stress,
                                 trim(rec[context_col]));
    if (doc.display_tokens.empty()) {
      throw CorpusError("row " + std::to_string(row) + ": empty text");
    }
    contexts.insert(doc.context);
    corpus.documents.push_back(std::move(doc));
  }
  corpus.context_universe.assign(contexts.begin(), contexts.end());
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return corpus_from_csv(buffer.str(), options);
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what());
  }
}

Corpus filter_corpus(const Corpus& corpus, const std::vector<std::string>& contexts,
                     std::optional<int> stress) {
  std::unordered_set<std::string> wanted;
  for (const auto& c : contexts) {
    if (std::find(corpus.context_universe.begin(), corpus.context_universe.end(), c) ==
        corpus.context_universe.end()) {
      throw CorpusError("unknown context label '" + c + "'");
    }
    wanted.insert(c);
  }

  Corpus out;
  out.split = corpus.split;
  for (const auto& c : contexts) {
    if (std::find(out.context_universe.begin(), out.context_universe.end(), c) ==
        out.context_universe.end()) {
      out.context_universe.push_back(c);
    }
  }
  for (const auto& doc : corpus.documents) {
    if (!wanted.contains(doc.context)) continue;
    if (stress && doc.stress != *stress) continue;
    out.documents.push_back(doc);
  }
  return out;
}

}  // namespace stressmcts
