#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "stressmcts/corpus.hpp"
#include "support/synthetic_corpus.hpp"

using namespace stressmcts;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const CorpusError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("load two valid rows") {
  const auto c = corpus_from_csv("text,label,subreddit\nhello there world,1,anxiety\nall good,0,relationships\n");
  REQUIRE(c.size() == 2);
  CHECK(c.documents[0].id == "row-0");
  CHECK(c.documents[1].id == "row-1");
  CHECK(c.documents[0].stress == 1);
  CHECK(c.documents[1].context == "relationships");
  CHECK(c.documents[0].display_tokens == std::vector<std::string>{"hello", "there", "world"});
  CHECK(c.context_universe == std::vector<std::string>{"anxiety", "relationships"});
}

TEST_CASE("quoted fields keep commas, doubled quotes and newlines") {
  const auto c = corpus_from_csv(
      "subreddit,text,label\r\nanxiety,\"I said \"\"no\"\", then\nleft, quickly.\",1\r\n");
  REQUIRE(c.size() == 1);
  CHECK(c.documents[0].raw_text == "I said \"no\", then\nleft, quickly.");
  CHECK(c.documents[0].display_tokens ==
        std::vector<std::string>{"I", "said", "\"no\",", "then", "left,", "quickly."});
}

TEST_CASE("unparseable stress names the row") {
  const auto msg = error_of([] { corpus_from_csv("text,label,subreddit\nfine,1,a\nbad row,yes,a\n"); });
  CHECK(msg.find("row 1") != std::string::npos);
  CHECK(msg.find("yes") != std::string::npos);
}

TEST_CASE("minus one is only accepted in lenient mode") {
  const std::string csv = "text,label,subreddit\nsome text,-1,a\n";
  CHECK_THROWS_AS(corpus_from_csv(csv), CorpusError);
  LoadOptions lenient;
  lenient.lenient_stress = true;
  CHECK(corpus_from_csv(csv, lenient).documents[0].stress == 0);
}

TEST_CASE("missing column, empty text and missing file are errors") {
  CHECK(error_of([] { corpus_from_csv("text,stress,subreddit\nx,1,a\n"); }).find("label") != std::string::npos);
  CHECK(error_of([] { corpus_from_csv("text,label,subreddit\nok,1,a\n   ,0,a\n"); }).find("row 1") !=
        std::string::npos);
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.csv"), CorpusError);
}

TEST_CASE("custom column names") {
  LoadOptions opt;
  opt.columns = {"body", "stressed", "forum"};
  const auto c = corpus_from_csv("forum,body,stressed\nx,a b c,1\n", opt);
  CHECK(c.documents[0].raw_text == "a b c");
  CHECK(c.documents[0].context == "x");
}

TEST_CASE("load from file") {
  const auto path = std::filesystem::temp_directory_path() / "stressmcts_corpus_test.csv";
  {
    std::ofstream out(path);
    out << testing::synthetic_csv({.documents = 10});
  }
  LoadOptions opt;
  opt.split = Split::test;
  const auto c = load_corpus(path, opt);
  CHECK(c.size() == 10);
  CHECK(c.split == Split::test);
  std::filesystem::remove(path);
}

TEST_CASE("filter_corpus") {
  const auto c = testing::synthetic_corpus({.documents = 40});

  SUBCASE("full universe, no stress filter is identity") {
    const auto f = filter_corpus(c, c.context_universe);
    REQUIRE(f.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(f.documents[i].id == c.documents[i].id);
    CHECK(f.context_universe == c.context_universe);
  }
  SUBCASE("context and stress filter preserves order and requested universe order") {
    const std::vector<std::string> wanted{"relationships", "anxiety"};
    const auto f = filter_corpus(c, wanted, 1);
    CHECK(f.context_universe == wanted);
    std::size_t expected = 0;
    std::size_t last = 0;
    for (const auto& d : c.documents) expected += (d.stress == 1 && (d.context == "anxiety" || d.context == "relationships"));
    CHECK(f.size() == expected);
    for (const auto& d : f.documents) {
      CHECK(d.stress == 1);
      const auto idx = static_cast<std::size_t>(std::stoul(d.id.substr(4)));
      CHECK(idx >= last);
      last = idx;
    }
  }
  SUBCASE("no matching rows gives an empty corpus") {
    const auto only = corpus_from_csv("text,label,subreddit\nx y,0,a\nz w,0,b\n");
    CHECK(filter_corpus(only, {"a"}, 1).empty());
  }
  SUBCASE("unknown context is an error") { CHECK_THROWS_AS(filter_corpus(c, {"nope"}), CorpusError); }
}

TEST_CASE("display tokens round-trip through a single-space join") {
  std::mt19937_64 rng(3);
  const std::string alphabet = "ab c\t\n,.'\"  x";
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto len = 1 + rng() % 40;
    for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    const auto tokens = split_whitespace(text);
    std::string joined;
    for (std::size_t i = 0; i < tokens.size(); ++i) joined += (i ? " " : "") + tokens[i];
    CHECK(split_whitespace(joined) == tokens);
  }
}
