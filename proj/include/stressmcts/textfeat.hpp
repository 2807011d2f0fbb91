#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stressmcts/corpus.hpp"

namespace stressmcts {

// Lowercases `text` and returns every maximal run of two or more word
// characters (Unicode letters and digits, plus '_'), in order.
std::vector<std::string> feat_tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  // `terms` need not be sorted or unique; the vocabulary normalizes them.
  explicit Vocabulary(std::vector<std::string> terms);

  const std::vector<std::string>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  // Column id of `term`, or -1 when out of vocabulary.
  std::int64_t index_of(std::string_view term) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.terms_ == b.terms_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
};

// Sparse term counts, sorted by column id. Absent columns are zero.
struct CountVector {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  std::size_t dimension = 0;

  std::uint32_t at(std::uint32_t column) const;
  std::uint64_t total() const;
  friend bool operator==(const CountVector&, const CountVector&) = default;
};

Vocabulary fit_vocabulary(const Corpus& corpus);
Vocabulary fit_vocabulary(const std::vector<std::string>& texts);

CountVector vectorize(std::string_view text, const Vocabulary& vocab);

CountVector add(const CountVector& a, const CountVector& b);

}  // namespace stressmcts
