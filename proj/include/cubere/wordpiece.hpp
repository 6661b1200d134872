#pragma once

// Uncased WordPiece tokenization applied word by word, plus the alignment
// from words to subword positions that the encoder pools over.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cubere/encoder.hpp"
#include "cubere/error.hpp"

namespace cubere {

class SubwordTokenizer {
 public:
  virtual ~SubwordTokenizer() = default;
  // Subword ids for one word; never empty.
  virtual std::vector<int> word_pieces(const std::string& word) const = 0;
  virtual int cls_id() const = 0;
  virtual int sep_id() const = 0;
};

namespace utf8 {

inline std::vector<char32_t> decode(const std::string& s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = c < 0xF0 ? 3 : 1;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if (c >= 0x80) {
      len = 1;
      cp = 0xFFFD;
    }
    if (len > 1) {
      if (i + len > s.size()) {
        out.push_back(0xFFFD);
        break;
      }
      for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t c : cps) append(out, c);
  return out;
}

}  // namespace utf8

namespace detail {

inline bool is_whitespace(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0xA0 || c == 0x3000 || (c >= 0x2000 && c <= 0x200A);
}

inline bool is_control(char32_t c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  return c < 0x20 || c == 0x7F || (c >= 0x80 && c < 0xA0) || c == 0xFFFD || c == 0x200B || c == 0xFEFF;
}

inline bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) return true;
  return (c >= 0xA1 && c <= 0xBF && c != 0xAA && c != 0xB2 && c != 0xB3 && c != 0xB5 && c != 0xB9 && c != 0xBA &&
          c != 0xBC && c != 0xBD && c != 0xBE) ||
         (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011);
}

inline bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

// Lowercases and strips diacritics for ASCII, Latin-1, Latin Extended-A,
// Greek and Cyrillic capitals; other code points pass through unchanged.
// Returns 0 for combining marks, which are dropped.
inline char32_t fold_case(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  if (c >= 0x300 && c <= 0x36F) return 0;
  if (c >= 0xC0 && c <= 0xFF) {
    static constexpr char32_t table[64] = {
        'a', 'a', 'a', 'a', 'a', 'a', 0xE6, 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
        0xF0, 'n', 'o', 'o', 'o', 'o', 'o', 0xD7, 0xF8, 'u', 'u', 'u', 'u', 'y', 0xFE, 0xDF,
        'a', 'a', 'a', 'a', 'a', 'a', 0xE6, 'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
        0xF0, 'n', 'o', 'o', 'o', 'o', 'o', 0xF7, 0xF8, 'u', 'u', 'u', 'u', 'y', 0xFE, 'y'};
    return table[c - 0xC0];
  }
  if (c >= 0x100 && c <= 0x17F) {
    struct Range {
      char32_t lo, hi, base;
    };
    static constexpr Range ranges[] = {
        {0x100, 0x105, 'a'}, {0x106, 0x10D, 'c'}, {0x10E, 0x10F, 'd'}, {0x112, 0x11B, 'e'}, {0x11C, 0x123, 'g'},
        {0x124, 0x125, 'h'}, {0x128, 0x130, 'i'}, {0x134, 0x135, 'j'}, {0x136, 0x137, 'k'}, {0x139, 0x13E, 'l'},
        {0x143, 0x148, 'n'}, {0x14C, 0x151, 'o'}, {0x154, 0x159, 'r'}, {0x15A, 0x161, 's'}, {0x162, 0x165, 't'},
        {0x168, 0x173, 'u'}, {0x174, 0x175, 'w'}, {0x176, 0x178, 'y'}, {0x179, 0x17E, 'z'}};
    for (const auto& r : ranges)
      if (c >= r.lo && c <= r.hi) return r.base;
    // Remaining letters come in upper/lower pairs with the capital first.
    switch (c) {
      case 0x110: case 0x126: case 0x132: case 0x13F: case 0x141: case 0x14A: case 0x152: case 0x166:
        return c + 1;
      default:
        return c;
    }
  }
  if (c >= 0x391 && c <= 0x3A9) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

}  // namespace detail

class WordPieceTokenizer final : public SubwordTokenizer {
 public:
  static constexpr std::size_t kMaxCharsPerWord = 100;

  explicit WordPieceTokenizer(std::vector<std::string> vocab, bool lower_case = true)
      : tokens_(std::move(vocab)), lower_case_(lower_case) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
    unk_ = require("[UNK]");
    cls_ = require("[CLS]");
    sep_ = require("[SEP]");
  }

  static WordPieceTokenizer from_file(const std::filesystem::path& path, bool lower_case = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      vocab.push_back(line);
    }
    return WordPieceTokenizer(std::move(vocab), lower_case);
  }

  int cls_id() const override { return cls_; }
  int sep_id() const override { return sep_; }
  int unk_id() const { return unk_; }
  std::size_t vocab_size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(id); }

  // Basic pre-splitting (case folding, punctuation and CJK isolation), then
  // greedy longest-match WordPiece on each piece.
  std::vector<std::string> basic_split(const std::string& word) const {
    std::vector<std::string> pieces;
    std::vector<char32_t> current;
    auto flush = [&] {
      if (!current.empty()) pieces.push_back(utf8::encode(current));
      current.clear();
    };
    for (char32_t c : utf8::decode(word)) {
      if (c == 0 || detail::is_control(c)) continue;
      if (lower_case_) {
        c = detail::fold_case(c);
        if (c == 0) continue;
      }
      if (detail::is_whitespace(c)) {
        flush();
      } else if (detail::is_punctuation(c) || detail::is_cjk(c)) {
        flush();
        pieces.push_back(utf8::encode({c}));
      } else {
        current.push_back(c);
      }
    }
    flush();
    return pieces;
  }

  std::vector<int> word_pieces(const std::string& word) const override {
    std::vector<int> out;
    for (const auto& piece : basic_split(word)) {
      const auto cps = utf8::decode(piece);
      if (cps.size() > kMaxCharsPerWord) {
        out.push_back(unk_);
        continue;
      }
      std::vector<int> sub;
      std::size_t start = 0;
      bool bad = false;
      while (start < cps.size()) {
        std::size_t end = cps.size();
        int found = -1;
        while (start < end) {
          std::string candidate = utf8::encode({cps.begin() + start, cps.begin() + end});
          if (start > 0) candidate = "##" + candidate;
          if (auto it = ids_.find(candidate); it != ids_.end()) {
            found = it->second;
            break;
          }
          --end;
        }
        if (found < 0) {
          bad = true;
          break;
        }
        sub.push_back(found);
        start = end;
      }
      if (bad)
        out.push_back(unk_);
      else
        out.insert(out.end(), sub.begin(), sub.end());
    }
    if (out.empty()) out.push_back(unk_);
    return out;
  }

 private:
  int require(const std::string& tok) const {
    auto it = ids_.find(tok);
    if (it == ids_.end()) throw SchemaError("WordPiece vocabulary lacks " + tok);
    return it->second;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  bool lower_case_;
  int unk_ = 0, cls_ = 0, sep_ = 0;
};

// Subword id sequence `[CLS] pieces... [SEP]` and the positions each word
// occupies in it. When the sequence would exceed `max_positions`, the words
// with the most pieces are cut back (never below one piece) until it fits.
inline SubwordAlignment align_words(const SubwordTokenizer& tok, const std::vector<std::string>& words,
                                    std::vector<int>& ids, std::size_t max_positions) {
  std::vector<std::vector<int>> pieces;
  pieces.reserve(words.size());
  std::size_t total = 2;
  for (const auto& w : words) {
    pieces.push_back(tok.word_pieces(w));
    total += pieces.back().size();
  }
  if (words.size() + 2 > max_positions)
    throw LengthError("sentence of " + std::to_string(words.size()) + " words exceeds " +
                      std::to_string(max_positions) + " encoder positions");
  while (total > max_positions) {
    auto longest = std::max_element(pieces.begin(), pieces.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    longest->pop_back();
    --total;
  }
  ids.clear();
  ids.push_back(tok.cls_id());
  SubwordAlignment alignment(words.size());
  for (std::size_t w = 0; w < words.size(); ++w)
    for (int id : pieces[w]) {
      alignment[w].push_back(static_cast<int>(ids.size()));
      ids.push_back(id);
    }
  ids.push_back(tok.sep_id());
  return alignment;
}

}  // namespace cubere
