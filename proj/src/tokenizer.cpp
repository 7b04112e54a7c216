#include "turl/tokenizer.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <map>
#include <stdexcept>

#include "turl/rng.hpp"

namespace turl {

namespace {

constexpr const char* kSpecialNames[] = {"[CLS]", "[SEP]", "[PAD]", "[UNK]"};

std::string bytes_to_json_text(const std::string& bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (unsigned char c : bytes) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

std::string json_text_to_bytes(const std::string& text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if ((c & 0xE0) == 0xC0 && i + 1 < text.size() && c <= 0xC3) {
      const auto c2 = static_cast<unsigned char>(text[++i]);
      out += static_cast<char>(((c & 0x1F) << 6) | (c2 & 0x3F));
    } else {
      throw std::runtime_error("vocabulary token text outside the byte range");
    }
  }
  return out;
}

bool is_delimiter(char c) { return kUrlDelimiters.find(c) != std::string_view::npos; }

}  // namespace

const char* BpeVocab::special_name(int id) {
  if (id < 0 || id >= kNumSpecials) throw std::out_of_range("not a special token id");
  return kSpecialNames[id];
}

BpeVocab::BpeVocab() {
  for (const char* name : kSpecialNames) id_to_token_.emplace_back(name);
  for (int b = 0; b < 256; ++b) add_token(std::string(1, static_cast<char>(b)));
}

int BpeVocab::add_token(const std::string& text) {
  if (auto it = token_to_id_.find(text); it != token_to_id_.end()) return it->second;
  const int id = size();
  id_to_token_.push_back(text);
  token_to_id_.emplace(text, id);
  max_token_bytes_ = std::max(max_token_bytes_, text.size());
  return id;
}

std::optional<int> BpeVocab::find(std::string_view text) const {
  if (auto it = token_to_id_.find(std::string(text)); it != token_to_id_.end()) return it->second;
  return std::nullopt;
}

int BpeVocab::add_merge(const std::string& left, const std::string& right) {
  if (!find(left) || !find(right)) throw std::invalid_argument("merge parts must be tokens");
  merges_.emplace_back(left, right);
  return add_token(left + right);
}

nlohmann::ordered_json BpeVocab::to_json() const {
  nlohmann::ordered_json specials = nlohmann::ordered_json::object();
  for (int i = 0; i < kNumSpecials; ++i) specials[kSpecialNames[i]] = i;
  nlohmann::ordered_json merges = nlohmann::ordered_json::array();
  for (const auto& [a, b] : merges_)
    merges.push_back({bytes_to_json_text(a), bytes_to_json_text(b)});
  nlohmann::ordered_json tokens = nlohmann::ordered_json::object();
  for (int id = kNumSpecials; id < size(); ++id)
    tokens[bytes_to_json_text(id_to_token_[static_cast<std::size_t>(id)])] = id;
  return {{"specials", specials}, {"merges", merges}, {"tokens", tokens}};
}

BpeVocab BpeVocab::from_json(const nlohmann::json& j) {
  const auto& specials = j.at("specials");
  for (int i = 0; i < kNumSpecials; ++i)
    if (specials.at(kSpecialNames[i]).get<int>() != i)
      throw std::runtime_error("vocabulary special ids do not match the expected layout");
  BpeVocab v;
  for (const auto& m : j.at("merges"))
    v.add_merge(json_text_to_bytes(m.at(0).get<std::string>()),
                json_text_to_bytes(m.at(1).get<std::string>()));
  const auto& tokens = j.at("tokens");
  if (tokens.size() != static_cast<std::size_t>(v.size() - kNumSpecials))
    throw std::runtime_error("vocabulary token table does not match its merges");
  for (const auto& [text, id] : tokens.items()) {
    const auto found = v.find(json_text_to_bytes(text));
    if (!found || *found != id.get<int>())
      throw std::runtime_error("vocabulary token '" + text + "' has an inconsistent id");
  }
  return v;
}

void BpeVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path.string());
  out << to_json().dump(1) << '\n';
}

BpeVocab BpeVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary: " + path.string());
  return from_json(nlohmann::json::parse(in));
}

std::uint64_t BpeVocab::hash() const { return fnv1a64(to_json().dump()); }

std::vector<UrlPiece> split_url_words(std::string_view url) {
  std::vector<UrlPiece> out;
  std::string word;
  for (char c : url) {
    if (is_delimiter(c)) {
      if (!word.empty()) out.push_back({std::move(word), false});
      word.clear();
      out.push_back({std::string(1, c), true});
    } else {
      word += c;
    }
  }
  if (!word.empty()) out.push_back({std::move(word), false});
  return out;
}

namespace {

using PairKey = std::uint64_t;

PairKey pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct Word {
  std::vector<int> symbols;
  std::int64_t freq = 0;
};

}  // namespace

BpeVocab train_bpe(const std::vector<std::string>& corpus, int vocab_size, std::uint64_t seed,
                   std::size_t sample_limit) {
  if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");
  if (vocab_size <= 256)
    throw std::invalid_argument("train_bpe: vocab_size must exceed the 256-byte base alphabet");

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (order.size() > sample_limit) {
    Rng rng = Rng(seed).fork("train_bpe");
    rng.shuffle(order.begin(), order.end());
    order.resize(sample_limit);
    std::sort(order.begin(), order.end());
  }

  BpeVocab vocab;
  std::map<std::string, std::int64_t> word_freq;
  for (auto i : order)
    for (auto& piece : split_url_words(corpus[i]))
      if (!piece.delimiter) ++word_freq[piece.text];

  std::vector<Word> words;
  words.reserve(word_freq.size());
  for (const auto& [text, freq] : word_freq) {
    Word w;
    w.freq = freq;
    for (unsigned char c : text) w.symbols.push_back(BpeVocab::kFirstByte + c);
    words.push_back(std::move(w));
  }

  std::unordered_map<PairKey, std::int64_t> counts;
  std::unordered_map<PairKey, std::vector<std::size_t>> where;
  auto add_pairs = [&](std::size_t wi, std::int64_t sign) {
    const auto& s = words[wi].symbols;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      const auto key = pair_key(s[k], s[k + 1]);
      counts[key] += sign * words[wi].freq;
      if (sign > 0) where[key].push_back(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_pairs(wi, +1);

  std::vector<std::size_t> stamp(words.size(), 0);
  std::size_t round = 0;
  const int target = vocab_size + BpeVocab::kNumSpecials;
  while (vocab.size() < target) {
    // most frequent pair; ties broken by the pair's text so the result
    // never depends on hash-map iteration order
    PairKey best = 0;
    std::int64_t best_count = 0;
    for (const auto& [key, count] : counts) {
      if (count <= 0) continue;
      if (count > best_count) {
        best = key;
        best_count = count;
      } else if (count == best_count) {
        const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
        const int ba = static_cast<int>(best >> 32), bb = static_cast<int>(best & 0xffffffffu);
        if (std::tie(vocab.text(a), vocab.text(b)) < std::tie(vocab.text(ba), vocab.text(bb)))
          best = key;
      }
    }
    if (best_count == 0) break;
    const int a = static_cast<int>(best >> 32);
    const int b = static_cast<int>(best & 0xffffffffu);
    const int merged = vocab.add_merge(vocab.text(a), vocab.text(b));

    ++round;
    const auto affected = where[best];
    for (auto wi : affected) {
      if (stamp[wi] == round) continue;
      stamp[wi] = round;
      auto& s = words[wi].symbols;
      bool present = false;
      for (std::size_t k = 0; k + 1 < s.size(); ++k)
        if (s[k] == a && s[k + 1] == b) present = true;
      if (!present) continue;
      add_pairs(wi, -1);
      std::vector<int> next;
      next.reserve(s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k + 1 < s.size() && s[k] == a && s[k + 1] == b) {
          next.push_back(merged);
          ++k;
        } else {
          next.push_back(s[k]);
        }
      }
      s = std::move(next);
      add_pairs(wi, +1);
    }
    counts.erase(best);
    where.erase(best);
  }
  return vocab;
}

TokenSequence tokenize(std::string_view url, const BpeVocab& vocab, int max_len) {
  if (max_len < 3) throw std::invalid_argument("tokenize: max_len must be at least 3");

  TokenSequence seq;
  const auto push = [&](int id, std::string text, std::vector<int> chars) {
    seq.subword_ids.push_back(id);
    seq.token_texts.push_back(std::move(text));
    seq.token_char_lengths.push_back(static_cast<int>(chars.size()));
    seq.total_chars += static_cast<int>(chars.size());
    seq.char_ids.push_back(std::move(chars));
  };
  const auto byte_chars = [](std::string_view bytes) {
    std::vector<int> chars;
    for (unsigned char c : bytes) chars.push_back(CharVocab::byte_id(c));
    return chars;
  };

  push(BpeVocab::kCls, BpeVocab::special_name(BpeVocab::kCls), {CharVocab::kClsChar});
  const std::size_t limit = static_cast<std::size_t>(max_len) - 1;
  for (const auto& piece : split_url_words(url)) {
    if (seq.subword_ids.size() >= limit) break;
    const std::string_view word = piece.text;
    std::size_t pos = 0;
    while (pos < word.size() && seq.subword_ids.size() < limit) {
      std::size_t len = std::min(vocab.max_token_bytes(), word.size() - pos);
      std::optional<int> id;
      for (; len > 0; --len)
        if ((id = vocab.find(word.substr(pos, len)))) break;
      if (!id) {
        len = 1;
        id = BpeVocab::kUnk;
      }
      const auto text = word.substr(pos, len);
      std::string shown = pos > 0 ? std::string(kContinuationMarker) + std::string(text)
                                  : std::string(text);
      push(*id, std::move(shown), byte_chars(text));
      pos += len;
    }
  }
  push(BpeVocab::kSep, BpeVocab::special_name(BpeVocab::kSep), {CharVocab::kSepChar});

  seq.subword_count = static_cast<int>(seq.subword_ids.size());
  seq.attention_mask.assign(static_cast<std::size_t>(max_len), 0);
  std::fill_n(seq.attention_mask.begin(), seq.subword_count, 1);
  seq.subword_ids.resize(static_cast<std::size_t>(max_len), BpeVocab::kPad);
  return seq;
}

FlatChars flatten_chars(const TokenSequence& seq) {
  assert(seq.subword_count > 0 && "token sequence without real tokens");
  FlatChars flat;
  flat.ids.reserve(static_cast<std::size_t>(seq.total_chars));
  for (int i = 0; i < seq.subword_count; ++i) {
    const auto& chars = seq.char_ids[static_cast<std::size_t>(i)];
    const int first = static_cast<int>(flat.ids.size());
    flat.ids.insert(flat.ids.end(), chars.begin(), chars.end());
    flat.bounds.emplace_back(first, static_cast<int>(flat.ids.size()) - 1);
  }
  return flat;
}

}  // namespace turl
