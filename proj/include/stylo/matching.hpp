#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stylo/provider.hpp"
#include "stylo/stylometry.hpp"

// Authorship matching: embedding similarity (ES), direct LLM style
// comparison (LDA) and stylometry-assisted LLM comparison (SALA).
//
// Offline providers cannot reason about style, so LDA and SALA replies are
// synthesized by a scoring shim and fed through the same response parser:
//   SALA: likelihood = exp(-mean z) over the nine numeric features.
//   LDA:  coarse agreement on three qualitative bins (sentence length, word
//         length, punctuation rate) plus a hash-seeded noise term in
//         [-0.2, 0.2]; intentionally blunter than SALA.
namespace stylo::matching {

enum class Strategy { ES, LDA, SALA };
enum class Verdict { Same, Different, Uncertain };

std::string_view to_string(Strategy s);
std::string_view to_string(Verdict v);
/// "es" | "lda" | "sala", case-insensitive. Throws InvalidArgument.
Strategy strategy_from_string(std::string_view s);

inline constexpr double kDefaultThreshold = 0.5;

struct Evidence {
  std::optional<double> cosine;                            ///< ES
  std::optional<stylometry::FeatureDistance> distance;     ///< SALA, always present
  std::vector<double> per_reference;                       ///< LDA likelihood per reference
  std::string rationale;
  std::vector<std::string> key_features;
  std::size_t failed_comparisons = 0;
  bool flagged = false;  ///< set when every comparison failed to parse
};

struct MatchResult {
  std::string author;
  Strategy strategy = Strategy::SALA;
  double likelihood = 0.0;
  Verdict verdict = Verdict::Different;
  Evidence evidence;
  std::size_t comparisons_made = 0;
};

nlohmann::json to_json(const MatchResult& r);

/// Same iff likelihood >= threshold; below it the model's "uncertain" is
/// kept, anything else becomes Different.
Verdict verdict_for(double likelihood, double threshold, std::optional<Verdict> model_verdict = std::nullopt);

struct ParsedReply {
  double likelihood = 0.0;
  std::optional<Verdict> verdict;
  std::vector<std::string> key_features;
  std::string rationale;
};

/// Accepts {"likelihood": number in [0,1], "verdict"?: "same"|"different"|"uncertain",
/// "key_features"?: [string], "rationale"?: string}; other keys are ignored.
/// Throws ParseError otherwise.
ParsedReply parse_reply(const nlohmann::json& j);

MatchResult match_es(const provider::Embedding& article, const provider::Embedding& reference,
                     double threshold = kDefaultThreshold);

std::string build_lda_prompt(std::string_view article_text, std::string_view reference_text);

/// Mean over references; a reference whose reply fails to parse scores 0 and
/// is counted. Throws EmptyList on no references.
MatchResult match_lda(std::string_view article_text, std::span<const std::string> reference_texts,
                      provider::Provider& provider, double threshold = kDefaultThreshold);

/// The offline LDA reply for one pair of texts.
double lda_shim_likelihood(std::string_view article_text, std::string_view reference_text);

std::string build_sala_prompt(std::string_view article_description, std::string_view reference_description);

using Reference = std::variant<stylometry::StylometricProfile, stylometry::AggregatedProfile>;

MatchResult match_sala(const stylometry::StylometricProfile& article, const Reference& reference,
                       provider::Provider& provider, double threshold = kDefaultThreshold);

inline double sala_shim_likelihood(double mean_z) { return std::exp(-mean_z); }

/// A candidate author as the matcher sees it.
struct MatchTarget {
  std::string author;
  std::optional<stylometry::AggregatedProfile> profile;  ///< preferred SALA reference
  std::optional<provider::Embedding> centroid;           ///< preferred ES reference
  std::vector<std::string> sample_texts;                 ///< LDA references; fallback for the others
};

/// The disputed article with everything the strategies need, computed once.
struct Subject {
  std::string text;
  stylometry::StylometricProfile profile;
  provider::Embedding embedding;
};

Subject prepare_subject(std::string text, provider::Provider& provider,
                        stylometry::SemanticSource source = stylometry::SemanticSource::Lexicon);

class Matcher {
 public:
  Matcher(Strategy strategy, provider::Provider& provider, double threshold = kDefaultThreshold,
          stylometry::SemanticSource source = stylometry::SemanticSource::Lexicon);

  /// Throws EmptyList when the target offers nothing to compare against.
  MatchResult match(const Subject& subject, const MatchTarget& target) const;

  Strategy strategy() const { return strategy_; }
  double threshold() const { return threshold_; }

 private:
  Strategy strategy_;
  provider::Provider* provider_;
  double threshold_;
  stylometry::SemanticSource source_;
};

}  // namespace stylo::matching
