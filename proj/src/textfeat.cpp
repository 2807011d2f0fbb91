#include "stressmcts/textfeat.hpp"

#include <algorithm>
#include <fstream>
#include <locale>
#include <map>
#include <set>

namespace stressmcts {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one UTF-8 sequence starting at text[i]; advances i. Malformed
// input decodes to U+FFFD, which is not a word character.
char32_t decode_utf8(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kReplacement;
  }
  if (i + extra >= text.size()) {
    i = text.size();
    return kReplacement;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      i += k;
      return kReplacement;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Character classification for non-ASCII code points comes from the
// C.UTF-8 locale when the platform provides it; otherwise non-ASCII
// characters are treated as separators.
class WideClassifier {
 public:
  WideClassifier() {
    for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
      try {
        locale_ = std::locale(name);
        facet_ = &std::use_facet<std::ctype<wchar_t>>(locale_);
        return;
      } catch (const std::runtime_error&) {
      }
    }
  }

  bool is_word(char32_t cp) const {
    if (cp < 0x80) {
      return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9') ||
             cp == '_';
    }
    if (facet_ == nullptr || cp == kReplacement) return false;
    return facet_->is(std::ctype_base::alnum, static_cast<wchar_t>(cp));
  }

  char32_t lower(char32_t cp) const {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + ('a' - 'A') : cp;
    if (facet_ == nullptr) return cp;
    return static_cast<char32_t>(facet_->tolower(static_cast<wchar_t>(cp)));
  }

 private:
  std::locale locale_ = std::locale::classic();
  const std::ctype<wchar_t>* facet_ = nullptr;
};

const WideClassifier& classifier() {
  static const WideClassifier instance;
  return instance;
}

}  // namespace

std::vector<std::string> feat_tokenize(std::string_view text) {
  const auto& cls = classifier();
  std::vector<std::string> out;
  std::string current;
  std::size_t run = 0;
  auto flush = [&] {
    if (run >= 2) out.push_back(std::move(current));
    current.clear();
    run = 0;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = cls.lower(decode_utf8(text, i));
    if (cls.is_word(cp)) {
      encode_utf8(cp, current);
      ++run;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  std::sort(terms_.begin(), terms_.end());
  terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
  index_.reserve(terms_.size());
  for (std::uint32_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], i);
}

std::int64_t Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary file '" + path.string() + "'");
  for (const auto& t : terms_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read vocabulary file '" + path.string() + "'");
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) terms.push_back(line);
  }
  return Vocabulary(std::move(terms));
}

std::uint32_t CountVector::at(std::uint32_t column) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), column,
                             [](const auto& e, std::uint32_t c) { return e.first < c; });
  return (it != entries.end() && it->first == column) ? it->second : 0;
}

std::uint64_t CountVector::total() const {
  std::uint64_t sum = 0;
  for (const auto& [col, count] : entries) sum += count;
  return sum;
}

Vocabulary fit_vocabulary(const std::vector<std::string>& texts) {
  if (texts.empty()) throw InvalidArgument("cannot fit a vocabulary on an empty corpus");
  std::set<std::string> terms;
  for (const auto& text : texts) {
    for (auto& term : feat_tokenize(text)) terms.insert(std::move(term));
  }
  if (terms.empty()) throw InvalidArgument("corpus yields no terms; vocabulary would be empty");
  return Vocabulary(std::vector<std::string>(terms.begin(), terms.end()));
}

Vocabulary fit_vocabulary(const Corpus& corpus) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& doc : corpus.documents) texts.push_back(doc.raw_text);
  return fit_vocabulary(texts);
}

CountVector vectorize(std::string_view text, const Vocabulary& vocab) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& term : feat_tokenize(text)) {
    const auto idx = vocab.index_of(term);
    if (idx >= 0) ++counts[static_cast<std::uint32_t>(idx)];
  }
  CountVector v;
  v.dimension = vocab.size();
  v.entries.assign(counts.begin(), counts.end());
  return v;
}

CountVector add(const CountVector& a, const CountVector& b) {
  std::map<std::uint32_t, std::uint32_t> counts(a.entries.begin(), a.entries.end());
  for (const auto& [col, count] : b.entries) counts[col] += count;
  CountVector v;
  v.dimension = std::max(a.dimension, b.dimension);
  v.entries.assign(counts.begin(), counts.end());
  return v;
}

}  // namespace stressmcts
