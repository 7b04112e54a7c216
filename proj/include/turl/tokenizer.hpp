#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace turl {

/// Characters that always form single-character tokens.
inline constexpr std::string_view kUrlDelimiters = ":/.-_?=&#@%~+";
inline constexpr std::string_view kContinuationMarker = "##";

/// Subword vocabulary learned by greedy most-frequent-pair merging.
///
/// Id layout: the four specials come first ([CLS], [SEP], [PAD], [UNK]),
/// then the 256 single-byte tokens, then merged tokens in merge order.
/// Continuation pieces share the id of the unmarked token text; the "##"
/// marker only appears in rendered token text.
class BpeVocab {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;
  static constexpr int kFirstByte = kNumSpecials;

  BpeVocab();

  /// Total id count, specials included.
  int size() const { return static_cast<int>(id_to_token_.size()); }
  std::optional<int> find(std::string_view text) const;
  const std::string& text(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  std::size_t max_token_bytes() const { return max_token_bytes_; }

  /// Records a merge; returns the id of the (possibly pre-existing) result.
  int add_merge(const std::string& left, const std::string& right);

  /// {"specials":{name:id}, "merges":[[a,b],...], "tokens":{text:id}}.
  /// Token bytes >= 0x80 are stored as the code point of equal value.
  nlohmann::ordered_json to_json() const;
  static BpeVocab from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static BpeVocab load(const std::filesystem::path& path);
  /// FNV-1a over the canonical JSON serialization.
  std::uint64_t hash() const;

  static const char* special_name(int id);

 private:
  int add_token(const std::string& text);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::size_t max_token_bytes_ = 1;
};

/// Byte-level character alphabet: [PAD_CHAR], one symbol per special token
/// that enters the character channel, then all 256 byte values.
struct CharVocab {
  static constexpr int kPadChar = 0;
  static constexpr int kClsChar = 1;
  static constexpr int kSepChar = 2;
  static constexpr int kFirstByte = 3;

  static constexpr int size() { return kFirstByte + 256; }
  static constexpr int byte_id(unsigned char b) { return kFirstByte + b; }
};

struct UrlPiece {
  std::string text;
  bool delimiter = false;
};

/// Splits on kUrlDelimiters; delimiters come out as one-byte pieces.
std::vector<UrlPiece> split_url_words(std::string_view url);

/// `vocab_size` counts byte and merged tokens (specials excluded) and must
/// exceed 256. When the corpus holds more than `sample_limit` URLs a seeded
/// sample of that size is used.
BpeVocab train_bpe(const std::vector<std::string>& corpus, int vocab_size, std::uint64_t seed,
                   std::size_t sample_limit = 200000);

struct TokenSequence {
  std::vector<int> subword_ids;     // length max_len, [PAD]-filled
  int subword_count = 0;            // m: real tokens including [CLS] and [SEP]
  std::vector<std::vector<int>> char_ids;
  std::vector<int> token_char_lengths;
  int total_chars = 0;              // N
  std::vector<int> attention_mask;  // m ones then zeros
  std::vector<std::string> token_texts;

  int max_len() const { return static_cast<int>(subword_ids.size()); }
};

TokenSequence tokenize(std::string_view url, const BpeVocab& vocab, int max_len);

struct FlatChars {
  std::vector<int> ids;
  /// Inclusive (first, last) flat index per real token.
  std::vector<std::pair<int, int>> bounds;
};

FlatChars flatten_chars(const TokenSequence& seq);

}  // namespace turl
