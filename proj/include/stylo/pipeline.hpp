#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylo/article.hpp"
#include "stylo/error.hpp"
#include "stylo/matching.hpp"
#include "stylo/profile_store.hpp"
#include "stylo/provider.hpp"

// The four-stage assessment: metadata extraction, candidate search,
// candidate matching and reflection.
namespace stylo::pipeline {

enum class Mode { ZeroShot, DbAugmented };

std::string_view to_string(Mode m);
/// "zeroshot" | "zero_shot" | "zero-shot" | "db" | "dbaugmented" | "db_augmented" | "db-augmented".
Mode mode_from_string(std::string_view s);

struct ProviderConfig {
  std::string kind = "stub";  ///< "stub" | "http"
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-4.1";
  std::string embed_model = "text-embedding-3-small";
  std::optional<double> temperature;
  std::string fixtures_path;  ///< stub web-search fixtures (JSON file)
};

struct PipelineConfig {
  Mode mode = Mode::DbAugmented;
  matching::Strategy strategy = matching::Strategy::SALA;
  std::size_t candidates_n = 20;
  std::size_t samples_per_candidate = 5;
  double alpha = 0.5;
  double fallback_cutoff = 0.05;  ///< best store score under which search falls back to the web
  double decision_threshold = matching::kDefaultThreshold;
  stylometry::SemanticSource semantic_source = stylometry::SemanticSource::Lexicon;
  ProviderConfig provider;
  std::string store_path;

  /// Throws InvalidArgument on unknown keys, bad types or out-of-range values.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Builds the configured provider (stub fixtures are loaded from
/// fixtures_path; the HTTP key comes from STYLO_API_KEY).
std::unique_ptr<provider::Provider> make_provider(const ProviderConfig& config);

struct Candidate {
  std::string author;
  double retrieval_score = 0.0;
  std::vector<std::string> sample_ids;    ///< store samples (DbAugmented)
  std::vector<std::string> sample_texts;  ///< fetched samples (ZeroShot) or stored bodies
  std::optional<stylometry::AggregatedProfile> profile;
  std::optional<provider::Embedding> centroid;
};

struct CandidateSet {
  Mode mode = Mode::ZeroShot;
  bool fell_back = false;  ///< DbAugmented was requested but web search supplied the candidates
  std::vector<Candidate> candidates;
};

struct ReflectedFeature {
  stylometry::Feature feature;
  double z = 0.0;
  double article_value = 0.0;
  double author_mean = 0.0;
  double author_spread = 0.0;
  std::string explanation;
};

struct ReflectionReport {
  std::string author;
  std::vector<ReflectedFeature> ranked;  ///< most identifying (lowest z) first
  std::string rationale;                 ///< provider mode only
};

struct StageTimings {
  std::chrono::microseconds extract{0}, search{0}, match{0}, reflect{0};
};

struct RiskReport {
  std::string article_id;
  Mode mode_requested = Mode::DbAugmented;
  Mode mode_used = Mode::DbAugmented;
  matching::Strategy strategy = matching::Strategy::SALA;
  ArticleMetadata metadata;
  CandidateSet candidates;
  std::vector<matching::MatchResult> ranked_matches;  ///< likelihood desc, author asc
  ReflectionReport reflection;
  std::size_t comparisons = 0;
  StageTimings timings;

  /// Author names of the first k ranked matches.
  std::vector<std::string> top_k_authors(std::size_t k) const;
  /// Timings are left out unless asked for, so equal runs serialize identically.
  nlohmann::json to_json(bool include_timings = false) const;
};

/// An error tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Stub-mode metadata heuristics, also used directly by tests.
ArticleMetadata heuristic_metadata(const Article& article, const store::ProfileStore* store = nullptr);
/// First date in the text ("March 3, 2020", "3 March 2020", "2020-03-03") as YYYY-MM-DD.
std::optional<std::string> find_date(std::string_view text);

/// Ranks the nine numeric features by ascending z; ties keep feature order.
ReflectionReport reflect(const std::string& author, const stylometry::StylometricProfile& article,
                         const stylometry::ReferenceStats& reference);

class Pipeline {
 public:
  /// `store` may be null; DbAugmented then always falls back to web search.
  Pipeline(PipelineConfig config, provider::Provider& provider, const store::ProfileStore* store);

  ArticleMetadata extract_metadata(const Article& article) const;
  CandidateSet search_stage(const Article& article, const ArticleMetadata& metadata,
                            const matching::Subject& subject) const;
  std::vector<matching::MatchResult> match_stage(const matching::Subject& subject,
                                                 const CandidateSet& candidates) const;
  ReflectionReport reflect_stage(const matching::Subject& subject, const Candidate& best) const;

  /// Runs all four stages. Errors are rethrown as StageError.
  RiskReport assess(const Article& article) const;

  /// One candidate's match as match_stage scores it: DbAugmented compares
  /// once against the stored profile, ZeroShot averages over the samples.
  matching::MatchResult match_candidate(const matching::Subject& subject, const Candidate& candidate,
                                        Mode mode) const;
  /// Reference statistics for z-scores; nullopt when the candidate has no usable sample.
  std::optional<stylometry::ReferenceStats> reference_of(const Candidate& candidate) const;

  /// Samples of one named author from web search, as zero-shot search collects them.
  Candidate fetch_candidate(const std::string& author, std::size_t samples) const;

  const PipelineConfig& config() const { return config_; }
  const store::ProfileStore* store() const { return store_; }
  provider::Provider& provider() const { return *provider_; }

 private:
  CandidateSet zero_shot_search(const ArticleMetadata& metadata) const;

  PipelineConfig config_;
  provider::Provider* provider_;
  const store::ProfileStore* store_;
};

}  // namespace stylo::pipeline
