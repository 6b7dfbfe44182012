#include "user/text/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "user/common/error.hpp"

namespace user {
namespace {

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto c = static_cast<unsigned char>(s[i]);
  int extra = 0;
  char32_t cp = c;
  if (c >= 0xF0 && c < 0xF8) {
    extra = 3;
    cp = c & 0x07;
  } else if (c >= 0xE0) {
    extra = 2;
    cp = c & 0x0F;
  } else if (c >= 0xC0) {
    extra = 1;
    cp = c & 0x1F;
  }
  if (i + static_cast<std::size_t>(extra) >= s.size()) {
    ++i;
    return c;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((cc & 0xC0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

bool is_separator(char32_t cp) {
  if (cp < 0x80) {
    const auto c = static_cast<unsigned char>(cp);
    return c <= 0x20 || c == 0x7F || (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
  }
  return cp == 0x85 || cp == 0xA0 || (cp >= 0xA1 && cp <= 0xBF && cp != 0xAA && cp != 0xB5 && cp != 0xBA) ||
         cp == 0xD7 || cp == 0xF7 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x206F) || cp == 0x3000 ||
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
         cp == 0xFEFF;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = next_code_point(text, i);
    if (is_separator(cp)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (cp < 0x80) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp))));
    } else {
      cur.append(text.substr(start, i - start));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

int Vocab::add(const std::string& word) {
  auto [it, fresh] = ids_.emplace(word, static_cast<int>(words_.size()));
  if (fresh) words_.push_back(word);
  return it->second;
}

int Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const { return words_.at(static_cast<std::size_t>(id)); }

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts)
    for (auto& w : split_words(t)) ++counts[w];
  // Frequency-descending, ties alphabetical; makes ids independent of input order.
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [w, c] : sorted)
    if (c >= min_count && w != "<pad>" && w != "<unk>") v.add(w);
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write vocab " + path.string());
  for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << i << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocab " + path.string());
  Vocab v;
  v.words_.clear();
  v.ids_.clear();
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(no, "vocab line without a tab");
    const std::string word = line.substr(0, tab);
    int id = 0;
    try {
      id = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(no, "bad vocab id");
    }
    if (id != static_cast<int>(v.words_.size())) throw ParseError(no, "vocab ids must be contiguous from 0");
    v.add(word);
  }
  if (v.words_.size() < 2 || v.words_[0] != "<pad>" || v.words_[1] != "<unk>")
    throw ParseError("vocab " + path.string() + " must start with <pad>, <unk>");
  return v;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  TokenSeq seq;
  for (const auto& w : split_words(text)) {
    if (seq.ids.size() == max_len) break;
    seq.ids.push_back(vocab.id(w));
    seq.mask.push_back(true);
  }
  return seq;
}

TokenSeq pad_to(TokenSeq seq, std::size_t length) {
  while (seq.ids.size() < length) {
    seq.ids.push_back(Vocab::kPad);
    seq.mask.push_back(false);
  }
  return seq;
}

}  // namespace user
