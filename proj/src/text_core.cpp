#include "stylo/text_core.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "data_files.hpp"

namespace stylo::text {
namespace {

struct CodePoint {
  char32_t value = 0;
  std::size_t length = 1;
  bool valid = true;
};

CodePoint decode(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1, true};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
  else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
  else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
  else return {0xFFFD, 1, false};
  if (i + len > s.size()) return {0xFFFD, 1, false};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1, false};
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong forms and surrogates.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
      (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
    return {0xFFFD, 1, false};
  }
  return {cp, len, true};
}

void encode(char32_t cp, std::string& out) {
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

bool is_space(char32_t cp) {
  return cp == ' ' || (cp >= 0x09 && cp <= 0x0D) || cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200B) ||
         cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000 ||
         cp == 0xFEFF;
}

bool is_control(char32_t cp) { return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F); }

bool is_ascii_alpha(char32_t cp) { return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z'); }
bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }
bool is_apostrophe(char32_t cp) { return cp == '\'' || cp == 0x2019; }

bool is_nonascii_symbol(char32_t cp) {
  return (cp >= 0xA1 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 || (cp >= 0x2010 && cp <= 0x2BFF) ||
         (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
         (cp >= 0xFF01 && cp <= 0xFF0F) || cp >= 0x1F000;
}

bool is_letter(char32_t cp) {
  if (cp < 0x80) return is_ascii_alpha(cp);
  return !is_space(cp) && !is_control(cp) && !is_nonascii_symbol(cp) && cp != 0xFFFD;
}

char32_t lower_cp(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp >= 0x100 && cp <= 0x17F) {
    if (cp == 0x130) return 'i';
    if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

bool is_terminal(const Token& t) {
  return t.kind == TokenKind::Punctuation && (t.surface == "." || t.surface == "!" || t.surface == "?");
}

bool is_closer(const Token& t) {
  static const std::unordered_set<std::string_view> kClosers{
      "\"", "'", ")", "]", "}", "\xE2\x80\x9D", "\xE2\x80\x99", "\xC2\xBB"};
  return t.kind == TokenKind::Punctuation && kClosers.contains(t.surface);
}

// Lower-cased dotted chain of glued words ending just before the period at
// index `dot`, e.g. "u.s" for "U.S." or "dr" for "Dr.".
std::string dotted_chain(const std::vector<Token>& tokens, std::size_t dot) {
  if (dot == 0 || tokens[dot].space_before || tokens[dot - 1].kind != TokenKind::Word) return {};
  std::string chain = tokens[dot - 1].lower;
  std::size_t j = dot - 1;
  while (j >= 2 && !tokens[j].space_before && tokens[j - 1].surface == "." &&
         !tokens[j - 1].space_before && tokens[j - 2].kind == TokenKind::Word) {
    chain = tokens[j - 2].lower + "." + chain;
    j -= 2;
  }
  return chain;
}

std::string normalize_apostrophes(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  for (std::size_t i = 0; i < word.size();) {
    if (word.compare(i, 3, "\xE2\x80\x99") == 0) {
      out.push_back('\'');
      i += 3;
    } else {
      out.push_back(word[i++]);
    }
  }
  return out;
}

const std::unordered_set<std::string>& stopwords() {
  static const auto kSet = [] {
    std::unordered_set<std::string> set;
    for (auto& line : detail::data_lines("stopwords.txt")) set.insert(std::move(line));
    return set;
  }();
  return kSet;
}

const std::unordered_set<std::string>& abbreviations() {
  static const auto kSet = [] {
    std::unordered_set<std::string> set;
    for (auto& line : detail::data_lines("abbreviations.txt")) set.insert(std::move(line));
    return set;
  }();
  return kSet;
}

std::optional<PosTag> parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kPosTagCount; ++i) {
    const auto tag = static_cast<PosTag>(i);
    if (to_string(tag) == name) return tag;
  }
  return std::nullopt;
}

const std::unordered_map<std::string, PosTag>& pos_lexicon() {
  static const auto kMap = [] {
    std::unordered_map<std::string, PosTag> map;
    for (const auto& fields : detail::data_rows("pos_lexicon.tsv")) {
      if (fields.size() < 2) continue;
      if (auto tag = parse_tag(fields[1])) map.emplace(fields[0], *tag);
    }
    return map;
  }();
  return kMap;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct SuffixRule {
  std::string_view suffix;
  std::size_t min_length;
  PosTag tag;
};

constexpr SuffixRule kSuffixRules[] = {
    {"ly", 4, PosTag::ADV},    {"ing", 5, PosTag::VERB},  {"ed", 4, PosTag::VERB},
    {"ize", 5, PosTag::VERB},  {"ise", 6, PosTag::VERB},  {"ify", 5, PosTag::VERB},
    {"ous", 5, PosTag::ADJ},   {"ful", 5, PosTag::ADJ},   {"ive", 5, PosTag::ADJ},
    {"able", 6, PosTag::ADJ},  {"ible", 6, PosTag::ADJ},  {"less", 6, PosTag::ADJ},
    {"ish", 5, PosTag::ADJ},   {"tion", 6, PosTag::NOUN}, {"sion", 6, PosTag::NOUN},
    {"ment", 6, PosTag::NOUN}, {"ness", 6, PosTag::NOUN}, {"ity", 5, PosTag::NOUN},
};

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Word: return "Word";
    case TokenKind::Punctuation: return "Punctuation";
    case TokenKind::Number: return "Number";
  }
  return "?";
}

std::string_view to_string(PosTag tag) {
  static constexpr std::array<std::string_view, kPosTagCount> kNames{
      "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "CONJ", "NUM", "PRT", "PUNCT", "X"};
  return kNames[static_cast<std::size_t>(tag)];
}

std::string fold_case(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto cp = decode(text, i);
    if (!cp.valid) {
      out.push_back(text[i]);
    } else {
      encode(lower_cp(cp.value), out);
    }
    i += cp.length;
  }
  return out;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size(); i += decode(text, i).length) ++n;
  return n;
}

std::uint64_t stable_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  bool space = false;
  std::size_t i = 0;
  auto emit = [&](std::size_t begin, std::size_t end, TokenKind kind) {
    Token t;
    t.surface = std::string(text.substr(begin, end - begin));
    t.lower = fold_case(t.surface);
    t.kind = kind;
    t.pos = kind == TokenKind::Punctuation ? PosTag::PUNCT
            : kind == TokenKind::Number    ? PosTag::NUM
                                           : PosTag::X;
    t.offset = begin;
    t.space_before = space;
    tokens.push_back(std::move(t));
    space = false;
  };

  while (i < text.size()) {
    const auto cp = decode(text, i);
    if (!cp.valid || is_space(cp.value) || is_control(cp.value)) {
      space = true;
      i += cp.length;
      continue;
    }
    const std::size_t begin = i;
    if (is_letter(cp.value)) {
      i += cp.length;
      while (i < text.size()) {
        const auto next = decode(text, i);
        if (next.valid && is_letter(next.value)) {
          i += next.length;
          continue;
        }
        if (next.valid && is_apostrophe(next.value) && i + next.length < text.size()) {
          const auto after = decode(text, i + next.length);
          if (after.valid && is_letter(after.value)) {
            i += next.length + after.length;
            continue;
          }
        }
        break;
      }
      emit(begin, i, TokenKind::Word);
    } else if (is_ascii_digit(cp.value)) {
      while (i < text.size() && is_ascii_digit(static_cast<unsigned char>(text[i]))) ++i;
      emit(begin, i, TokenKind::Number);
    } else {
      i += cp.length;
      emit(begin, i, TokenKind::Punctuation);
    }
  }
  return tokens;
}

SegmentedText split_sentences(std::vector<Token> tokens) {
  SegmentedText out;
  out.tokens = std::move(tokens);
  const auto& toks = out.tokens;
  const std::size_t n = toks.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (!is_terminal(toks[i])) {
      ++i;
      continue;
    }
    if (toks[i].surface == ".") {
      const bool glued = i + 1 < n && !toks[i + 1].space_before &&
                         toks[i + 1].kind != TokenKind::Punctuation;
      if (glued) {
        ++i;
        continue;
      }
      const auto chain = dotted_chain(toks, i);
      if (!chain.empty() && is_abbreviation(chain)) {
        ++i;
        continue;
      }
    }
    std::size_t end = i + 1;
    while (end < n && is_terminal(toks[end])) ++end;
    while (end < n && !toks[end].space_before && is_closer(toks[end])) ++end;
    out.sentences.push_back({start, end});
    start = end;
    i = end;
  }
  if (start < n) out.sentences.push_back({start, n});
  return out;
}

SegmentedText analyze(std::string_view text) {
  auto tokens = tokenize(text);
  tag_pos(tokens);
  return split_sentences(std::move(tokens));
}

int count_syllables(std::string_view word) {
  auto vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
  };
  int groups = 0;
  bool in_group = false;
  for (const char c : word) {
    if (vowel(c)) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  if (word.size() > 2 && word.back() == 'e' && !ends_with(word, "le")) --groups;
  return std::max(groups, 1);
}

PosTag tag_word(std::string_view lower_word) {
  const auto key = normalize_apostrophes(lower_word);
  const auto& lexicon = pos_lexicon();
  if (auto it = lexicon.find(key); it != lexicon.end()) return it->second;
  if (std::none_of(key.begin(), key.end(), [](char c) { return is_ascii_alpha(static_cast<unsigned char>(c)); })) {
    return PosTag::X;
  }
  for (const auto& rule : kSuffixRules) {
    if (key.size() >= rule.min_length && ends_with(key, rule.suffix)) return rule.tag;
  }
  return PosTag::NOUN;
}

void tag_pos(std::span<Token> tokens) {
  for (auto& t : tokens) {
    switch (t.kind) {
      case TokenKind::Punctuation: t.pos = PosTag::PUNCT; break;
      case TokenKind::Number: t.pos = PosTag::NUM; break;
      case TokenKind::Word: t.pos = tag_word(t.lower); break;
    }
  }
}

bool is_stopword(std::string_view lower_word) {
  return stopwords().contains(normalize_apostrophes(lower_word));
}

bool is_abbreviation(std::string_view lower_chain) {
  return abbreviations().contains(std::string(lower_chain));
}

}  // namespace stylo::text
