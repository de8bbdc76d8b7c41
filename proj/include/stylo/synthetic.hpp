#pragma once

// Synthetic corpora. Words are pronounceable consonant-vowel strings, so they
// tokenize as single words, are never stopwords and end in a vowel (no
// suffix rule fires, every word tags as NOUN).

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stylo/article.hpp"
#include "stylo/text_core.hpp"

namespace stylo::synthetic {


inline const std::string kConsonants = "bdfgklmnprstvz";
inline const std::string kVowels = "aiou";

/// The id-th word with `syllables` CV syllables (ids wrap modulo 56^syllables).
inline std::string pseudo_word(std::uint64_t id, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    const auto digit = id % 56;
    id /= 56;
    w += kConsonants[digit / 4];
    w += kVowels[digit % 4];
  }
  return w;
}

inline std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

inline std::string author_name(std::size_t i) { return "Author " + capitalize(pseudo_word(i + 7, 2)); }

/// Authors with pairwise-disjoint content vocabularies; `articles_per_author`
/// articles each, ids "<author index>-<article index>".
inline std::vector<Article> disjoint_corpus(std::size_t authors, std::size_t articles_per_author,
                                                   std::uint64_t seed, std::size_t vocabulary = 40) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> glue{"the", "and", "of", "in", "was"};
  std::vector<Article> out;
  for (std::size_t a = 0; a < authors; ++a) {
    for (std::size_t k = 0; k < articles_per_author; ++k) {
      std::string body;
      const auto sentences = 4 + rng() % 4;
      for (std::size_t s = 0; s < sentences; ++s) {
        const auto words = 6 + rng() % 7;
        for (std::size_t w = 0; w < words; ++w) {
          std::string word = (w % 3 == 2) ? glue[rng() % glue.size()]
                                          : pseudo_word(1000 + a * vocabulary + rng() % vocabulary, 3);
          if (w == 0) word = capitalize(word);
          body += word;
          body += (w + 1 == words) ? ". " : " ";
        }
      }
      body.pop_back();
      Article article;
      article.id = std::to_string(a) + "-" + std::to_string(k);
      article.title = capitalize(pseudo_word(1000 + a * vocabulary + k % vocabulary, 3)) + " report";
      article.body = std::move(body);
      article.author = author_name(a);
      out.push_back(std::move(article));
    }
  }
  return out;
}

struct StyleSpec {
  std::size_t sentence_length;  ///< words per sentence, two of them stopwords
  int syllables;                ///< syllables in every content word
  int commas;                   ///< commas per sentence
};

/// Author i's fixed writing habits; no two authors share a sentence length.
inline StyleSpec style_of(std::size_t i) { return {5 + i, 2 + static_cast<int>(i % 3), static_cast<int>(i % 3)}; }

inline constexpr std::size_t kStyledSentences = 8;

/// Articles whose nine numeric features are constant per author: fixed
/// sentence count and length, fixed stopword and comma slots, and content
/// words that never repeat within an article. All authors draw content words
/// from shared pools (one per syllable count) and use the same stopword
/// cycle, so bags of words carry almost no author signal.
inline std::vector<Article> styled_corpus(std::size_t authors, std::size_t articles_per_author,
                                                 std::uint64_t seed) {
  static const std::vector<std::string> cycle{"the", "of", "and", "in", "to"};
  std::mt19937_64 rng(seed);
  std::vector<Article> out;
  for (std::size_t a = 0; a < authors; ++a) {
    const auto style = style_of(a);
    for (std::size_t k = 0; k < articles_per_author; ++k) {
      std::vector<std::string> used;
      const auto fresh_word = [&] {
        for (;;) {
          auto w = pseudo_word(rng(), style.syllables);
          if (text::is_stopword(w) || text::is_abbreviation(w)) continue;
          if (text::tag_word(w) != text::PosTag::NOUN) continue;
          if (std::find(used.begin(), used.end(), w) != used.end()) continue;
          used.push_back(w);
          return w;
        }
      };
      std::string body;
      std::size_t stop = 0;
      for (std::size_t s = 0; s < kStyledSentences; ++s) {
        const auto n = style.sentence_length;
        for (std::size_t w = 0; w < n; ++w) {
          std::string word = (w == 1 || w == n - 2) ? cycle[stop++ % cycle.size()] : fresh_word();
          if (w == 0) word = capitalize(word);
          body += word;
          if ((style.commas >= 1 && w == 0) || (style.commas >= 2 && w == 2)) body += ',';
          body += (w + 1 == n) ? ". " : " ";
        }
      }
      body.pop_back();
      Article article;
      article.id = "s" + std::to_string(a) + "-" + std::to_string(k);
      article.title = capitalize(fresh_word()) + " " + fresh_word();
      article.body = std::move(body);
      article.author = author_name(a);
      out.push_back(std::move(article));
    }
  }
  return out;
}

}  // namespace stylo::synthetic
