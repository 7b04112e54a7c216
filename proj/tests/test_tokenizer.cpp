#include <doctest.h>

#include "oracles.hpp"
#include "turl/tokenizer.hpp"

using namespace turl;

namespace {

std::string strip_marker(const std::string& t) {
  return t.rfind(kContinuationMarker, 0) == 0 ? t.substr(kContinuationMarker.size()) : t;
}

std::string rejoin(const TokenSequence& s) {
  std::string out;
  for (int i = 1; i + 1 < s.subword_count; ++i) out += strip_marker(s.token_texts[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<std::string> urls() {
  std::vector<std::string> out;
  for (const auto& r : oracle::separable_corpus(200, 9).records) out.push_back(r.url);
  return out;
}

}  // namespace

TEST_CASE("first merge of a unique most frequent pair") {
  const auto v = train_bpe({"aaab", "aaab"}, 260, 1);
  REQUIRE(!v.merges().empty());
  CHECK(v.merges()[0] == std::pair<std::string, std::string>{"a", "a"});
  CHECK(train_bpe({"aaab", "aaab"}, 260, 1).merges() == v.merges());
}

TEST_CASE("vocab size below the byte alphabet is rejected") {
  CHECK_THROWS(train_bpe({"aaab", "aaab"}, 10, 1));
  CHECK_THROWS(train_bpe({}, 300, 1));
}

TEST_CASE("training is deterministic and merges never cross delimiters") {
  const auto corpus = urls();
  const auto a = train_bpe(corpus, 400, 3);
  const auto b = train_bpe(corpus, 400, 3);
  CHECK(a.merges() == b.merges());
  CHECK(a.hash() == b.hash());
  CHECK(a.size() <= 400 + BpeVocab::kNumSpecials);
  for (const auto& [l, r] : a.merges())
    for (char c : l + r) CHECK(kUrlDelimiters.find(c) == std::string_view::npos);
}

TEST_CASE("minimal url") {
  const BpeVocab v;
  const auto s = tokenize("a", v, 200);
  CHECK(s.subword_count == 3);
  CHECK(s.token_texts == std::vector<std::string>{"[CLS]", "a", "[SEP]"});
  CHECK(s.total_chars == 3);
  CHECK(s.max_len() == 200);
  CHECK(s.subword_ids[3] == BpeVocab::kPad);
}

TEST_CASE("truncation keeps the separator last") {
  const auto v = train_bpe(urls(), 300, 1);
  const auto s = tokenize("https://www.contactmailsupport.net/customer-service/amazon/", v, 5);
  CHECK(s.subword_count == 5);
  CHECK(s.token_texts.back() == "[SEP]");
  CHECK(s.subword_ids[4] == BpeVocab::kSep);
  CHECK(s.attention_mask == std::vector<int>{1, 1, 1, 1, 1});
}

TEST_CASE("delimiters are single tokens") {
  const auto v = train_bpe(urls(), 350, 1);
  const auto s = tokenize("https://www.contactmailsupport.net/customer-service/amazon/", v, 200);
  REQUIRE(s.subword_count > 8);
  CHECK(s.token_texts[0] == "[CLS]");
  CHECK(s.token_texts[2] == ":");
  CHECK(s.token_texts[3] == "/");
  CHECK(s.token_texts[4] == "/");
  CHECK(s.token_texts[static_cast<std::size_t>(s.subword_count - 1)] == "[SEP]");
  for (const auto& t : s.token_texts)
    if (t.size() > 1 && t.rfind("##", 0) != 0 && t[0] != '[')
      for (char c : t) CHECK(kUrlDelimiters.find(c) == std::string_view::npos);
}

TEST_CASE("round trip, char counts and purity") {
  const auto v = train_bpe(urls(), 380, 2);
  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    std::string u;
    const auto len = 1 + rng.below(60);
    for (std::uint64_t i = 0; i < len; ++i) u += static_cast<char>(1 + rng.below(255));
    const auto s = tokenize(u, v, 512);
    CHECK(rejoin(s) == u);
    int sum = 0;
    for (int c : s.token_char_lengths) sum += c;
    CHECK(sum == s.total_chars);
    const auto again = tokenize(u, v, 512);
    CHECK(again.subword_ids == s.subword_ids);
    CHECK(again.char_ids == s.char_ids);
  }
}

TEST_CASE("continuation pieces share ids with the unmarked text") {
  BpeVocab v;
  v.add_merge("a", "b");
  const auto s = tokenize("abab", v, 10);
  CHECK(s.token_texts == std::vector<std::string>{"[CLS]", "ab", "##ab", "[SEP]"});
  CHECK(s.subword_ids[1] == s.subword_ids[2]);
  CHECK(s.char_ids[2] == std::vector<int>{CharVocab::byte_id('a'), CharVocab::byte_id('b')});
}

TEST_CASE("flatten chars") {
  BpeVocab v;
  v.add_merge("a", "b");
  TokenSequence s = tokenize("ab.c", v, 10);
  // tokens [CLS] ab . c [SEP]
  const auto flat = flatten_chars(s);
  CHECK(flat.ids.size() == 6u);
  CHECK(flat.bounds == std::vector<std::pair<int, int>>{{0, 0}, {1, 2}, {3, 3}, {4, 4}, {5, 5}});
}

TEST_CASE("vocabulary json round trip keeps the hash") {
  const auto v = train_bpe(urls(), 330, 4);
  const auto back = BpeVocab::from_json(nlohmann::json::parse(v.to_json().dump()));
  CHECK(back.hash() == v.hash());
  CHECK(back.merges() == v.merges());
  CHECK(back.size() == v.size());
}

TEST_CASE("high bytes survive the vocabulary file") {
  std::vector<std::string> corpus(4, "\xc3\xa9\xc3\xa9\xc3\xa9");
  const auto v = train_bpe(corpus, 260, 1);
  const auto back = BpeVocab::from_json(nlohmann::json::parse(v.to_json().dump()));
  CHECK(back.merges() == v.merges());
  CHECK(tokenize("\xc3\xa9\xc3\xa9", back, 10).subword_ids == tokenize("\xc3\xa9\xc3\xa9", v, 10).subword_ids);
}
