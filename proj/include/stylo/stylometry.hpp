#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stylo::provider {
class Provider;
}

namespace stylo::stylometry {

/// Scalar stylometric features in their fixed reporting order. The first
/// nine are computed directly from the text; polarity and subjectivity are
/// semantic and come from a provider or the bundled lexicon.
enum class Feature : std::size_t {
  UniqueWordCount,
  AvgWordLength,
  TypeTokenRatio,
  HapaxRatio,
  AvgSentenceLength,
  StopwordCount,
  PunctuationCount,
  PosVariationCount,
  FleschScore,
  Polarity,
  Subjectivity,
};

inline constexpr std::size_t kNumericFeatureCount = 9;
inline constexpr std::size_t kScalarFeatureCount = 11;

/// The nine text-derived features, in order.
std::span<const Feature> numeric_features();
std::span<const Feature> scalar_features();

/// snake_case identifier, e.g. "type_token_ratio".
std::string_view feature_key(Feature f);
/// Human label, e.g. "type-token ratio".
std::string_view feature_label(Feature f);
bool is_count_feature(Feature f);
std::optional<Feature> feature_from_key(std::string_view key);

struct StylometricProfile {
  double unique_word_count = 0;
  double avg_word_length = 0;
  double type_token_ratio = 0;
  double hapax_ratio = 0;
  double avg_sentence_length = 0;
  double stopword_count = 0;
  double punctuation_count = 0;
  double pos_variation_count = 0;
  double flesch_score = 0;
  double polarity = 0;
  double subjectivity = 0;
  std::string style_summary;

  double value(Feature f) const;
  double& value(Feature f);

  friend bool operator==(const StylometricProfile&, const StylometricProfile&) = default;
};

struct RunningStat {
  double mean = 0.0;
  double m2 = 0.0;  ///< sum of squared deviations from the mean

  friend bool operator==(const RunningStat&, const RunningStat&) = default;
};

/// Per-feature mean and population standard deviation over an author's samples.
class AggregatedProfile {
 public:
  /// Welford update with one more sample.
  void add(const StylometricProfile& sample);

  std::size_t sample_count() const { return count_; }
  double mean(Feature f) const { return stats_[static_cast<std::size_t>(f)].mean; }
  double stddev(Feature f) const;
  const RunningStat& stat(Feature f) const { return stats_[static_cast<std::size_t>(f)]; }
  const std::string& style_summary() const { return style_summary_; }

  /// Profile whose values are the feature means.
  StylometricProfile means() const;

  nlohmann::json to_json() const;
  static AggregatedProfile from_json(const nlohmann::json& j);

  static AggregatedProfile from_moments(std::size_t count, const std::array<RunningStat, kScalarFeatureCount>& stats,
                                        std::string style_summary);

  friend bool operator==(const AggregatedProfile&, const AggregatedProfile&) = default;
  friend AggregatedProfile aggregate(std::span<const StylometricProfile> profiles);

 private:
  void merge_summary(const std::string& summary);

  std::array<RunningStat, kScalarFeatureCount> stats_{};
  std::size_t count_ = 0;
  std::string style_summary_;
  std::vector<std::string> seen_summaries_;
};

inline constexpr std::size_t kStyleSummaryCap = 512;

enum class SemanticSource { Lexicon, Provider };

/// Throws EmptyText when the text has no word tokens. Provider mode needs
/// a provider and propagates its errors.
StylometricProfile compute_features(std::string_view text, SemanticSource source = SemanticSource::Lexicon,
                                    provider::Provider* provider = nullptr);

/// Batch aggregation (two-pass mean/variance). Throws EmptyList.
AggregatedProfile aggregate(std::span<const StylometricProfile> profiles);

inline constexpr double kStdFloor = 1e-6;
/// Surrogate spread for a single-sample reference: this fraction of |value|.
inline constexpr double kSurrogateRelativeStd = 0.2;

struct FeatureDistance {
  std::array<double, kNumericFeatureCount> z{};
  double mean_z = 0.0;
};

/// z_f = |x_f - mean_f| / max(std_f, 1e-6) over the nine numeric features.
FeatureDistance feature_distance(const StylometricProfile& article, const AggregatedProfile& author);

/// Reference means and spreads for distance scoring.
struct ReferenceStats {
  std::array<double, kScalarFeatureCount> mean{};
  std::array<double, kScalarFeatureCount> spread{};
  std::size_t sample_count = 1;

  static ReferenceStats from(const AggregatedProfile& profile);
  /// Single profile with the 20% surrogate spread.
  static ReferenceStats from(const StylometricProfile& profile);
};

FeatureDistance feature_distance(const StylometricProfile& article, const ReferenceStats& reference);

/// One "<label>: <feature> = <value>" line per feature. Counts render as
/// integers, everything else with four decimals.
std::string describe_features(const StylometricProfile& profile, std::string_view label);
/// Same layout with "mean ± std" values.
std::string describe_features(const AggregatedProfile& profile, std::string_view label);

nlohmann::json to_json(const StylometricProfile& profile);
StylometricProfile profile_from_json(const nlohmann::json& j);

/// Fixed-point rendering used in prompts and reports.
std::string format_fixed(double value, int decimals = 4);

}  // namespace stylo::stylometry
