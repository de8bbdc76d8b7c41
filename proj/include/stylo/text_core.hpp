#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Deterministic English text primitives: tokenization, sentence
// segmentation, syllable counting, stopwords and a coarse lexicon/suffix
// part-of-speech tagger. Everything here is a pure function of its input
// and the bundled data files.
namespace stylo::text {

enum class TokenKind : std::uint8_t { Word, Punctuation, Number };

/// Coarse universal tag inventory.
enum class PosTag : std::uint8_t {
  NOUN, VERB, ADJ, ADV, PRON, DET, ADP, CONJ, NUM, PRT, PUNCT, X
};

inline constexpr std::size_t kPosTagCount = 12;

std::string_view to_string(TokenKind kind);
std::string_view to_string(PosTag tag);

struct Token {
  std::string surface;
  std::string lower;
  TokenKind kind = TokenKind::Word;
  PosTag pos = PosTag::X;
  std::size_t offset = 0;       ///< byte offset of surface in the source text
  bool space_before = false;    ///< whitespace separates it from the previous token
};

/// Half-open token index range [begin, end).
struct SentenceRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const SentenceRange&, const SentenceRange&) = default;
};

struct SegmentedText {
  std::vector<Token> tokens;
  std::vector<SentenceRange> sentences;

  std::span<const Token> sentence(std::size_t i) const {
    return std::span<const Token>(tokens).subspan(sentences[i].begin, sentences[i].size());
  }
};

/// Letter/apostrophe runs become Word tokens (an apostrophe is kept only
/// between letters), ASCII digit runs become Number tokens and every other
/// visible character is its own Punctuation token. Pos is PUNCT/NUM for
/// punctuation/numbers and X for words until tag_pos runs.
std::vector<Token> tokenize(std::string_view text);

/// A sentence ends after a run of terminal marks (. ! ?) plus any closing
/// quotes or brackets. A period does not end a sentence when it is glued to
/// a following word or number ("3.5", "U.S") or when the dotted word chain
/// before it is a bundled abbreviation ("Dr.", "U.S."). Trailing tokens
/// without a terminal mark form the final sentence.
SegmentedText split_sentences(std::vector<Token> tokens);

/// Convenience: tokenize, tag and segment.
SegmentedText analyze(std::string_view text);

/// Vowel groups (a e i o u y) minus a silent final 'e', minimum 1.
int count_syllables(std::string_view lower_word);

/// Tags a single lower-cased word with the lexicon, then suffix rules, then
/// the NOUN default.
PosTag tag_word(std::string_view lower_word);

void tag_pos(std::span<Token> tokens);

bool is_stopword(std::string_view lower_word);
bool is_abbreviation(std::string_view lower_chain);

/// Simple code-point lowercasing (ASCII, Latin-1, Latin Extended-A, Greek,
/// Cyrillic). No locale-specific folding.
std::string fold_case(std::string_view text);

/// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view text);

/// 64-bit FNV-1a. Used wherever a hash must be stable across platforms.
std::uint64_t stable_hash(std::string_view bytes);

}  // namespace stylo::text
