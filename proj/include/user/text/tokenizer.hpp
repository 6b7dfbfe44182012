#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace user {

inline constexpr std::size_t kMaxTextLength = 30;

/// Lowercases ASCII letters and splits on whitespace and punctuation
/// (ASCII plus the common Unicode space and punctuation blocks). No
/// truncation.
std::vector<std::string> split_words(std::string_view text);

/// Token ids with reserved PAD = 0 and UNK = 1.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();

  /// Builds from word counts; words seen fewer than `min_count` times map to UNK.
  static Vocab build(const std::vector<std::string>& texts, std::size_t min_count = 1);

  /// Assigns the next id to `word` if it is new; returns its id.
  int add(const std::string& word);
  int id(std::string_view word) const;
  const std::string& word(int id) const;
  std::size_t size() const { return words_.size(); }

  /// Lines of `token<TAB>id`.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

struct TokenSeq {
  std::vector<int> ids;
  std::vector<bool> mask;  // true for real tokens

  std::size_t valid() const {
    std::size_t n = 0;
    for (bool b : mask) n += b ? 1 : 0;
    return n;
  }
};

/// Tokenizes and maps to ids, truncating to `max_len` and recording the mask.
TokenSeq tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len = kMaxTextLength);

/// Appends PAD positions until the sequence has `length` entries.
TokenSeq pad_to(TokenSeq seq, std::size_t length);

}  // namespace user
