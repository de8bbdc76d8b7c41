#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stylo/article.hpp"
#include "stylo/provider.hpp"
#include "stylo/stylometry.hpp"

// Persistent author-profile database: articles, per-author aggregated
// stylometry, embedding centroids and TF-IDF keywords.
//
// On-disk layout (one directory):
//   manifest.json   StoreManifest
//   articles.jsonl  one Article per line, append-only
//   authors.jsonl   one AuthorRecord per line, rewritten on ingestion
//   lock            flock target: shared for readers, exclusive for the writer
namespace stylo::store {

struct Keyword {
  std::string term;
  double score = 0.0;

  friend bool operator==(const Keyword&, const Keyword&) = default;
};

struct AuthorRecord {
  std::string name;
  std::vector<std::string> sample_ids;
  stylometry::AggregatedProfile profile;
  provider::Embedding centroid;             ///< unit-norm mean of sample embeddings
  std::vector<double> embedding_sum;        ///< running sum behind the centroid
  std::vector<Keyword> keywords;            ///< top terms by TF-IDF, best first

  nlohmann::json to_json() const;
  static AuthorRecord from_json(const nlohmann::json& j);
};

struct StoreManifest {
  int version = 1;
  std::size_t embedding_dim = 0;
  std::size_t author_count = 0;
  std::size_t article_count = 0;
  std::string created;
  std::string updated;
};

struct IngestOptions {
  /// Authors to leave out on purpose (their articles are skipped).
  std::vector<std::string> exclude_authors;
  stylometry::SemanticSource semantic_source = stylometry::SemanticSource::Lexicon;
};

struct IngestSummary {
  std::size_t authors_added = 0;
  std::size_t articles_added = 0;
  std::size_t skipped = 0;         ///< all skipped articles
  std::size_t missing_author = 0;  ///< skipped for lack of a byline
  std::size_t duplicates = 0;      ///< skipped because the id already exists
  std::size_t excluded = 0;        ///< skipped by the exclusion list
  std::size_t invalid = 0;         ///< skipped for an empty id or body
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const IngestSummary& s);
nlohmann::json to_json(const StoreManifest& m);

struct ScoredAuthor {
  std::string name;
  double score = 0.0;
  double keyword_score = 0.0;    ///< Jaccard overlap of keyword sets
  double embedding_score = 0.0;  ///< cosine to the author centroid
};

struct SearchOptions {
  double alpha = 0.5;  ///< weight of the keyword score
};

inline constexpr std::size_t kKeywordsPerAuthor = 20;

class ProfileStore {
 public:
  enum class Access { ReadOnly, ReadWrite };

  /// Opens (ReadWrite creates) a store directory. Throws StoreLocked when
  /// another process holds an incompatible lock, IoError on unreadable data.
  static ProfileStore open(const std::filesystem::path& dir, Access access);
  /// Non-persistent store for tests and one-off runs.
  static ProfileStore in_memory();

  ProfileStore(ProfileStore&&) noexcept;
  ProfileStore& operator=(ProfileStore&&) noexcept;
  ~ProfileStore();

  /// Ingests bylined articles; duplicates, unbylined and excluded articles
  /// are skipped and counted. Persists before returning.
  IngestSummary warm_up(std::span<const Article> articles, provider::Provider& provider,
                        const IngestOptions& options = {});

  /// Top-n authors by alpha * jaccard(keywords) + (1 - alpha) * cosine(centroid),
  /// ties by ascending name. Metadata topic and publisher terms join the
  /// article's keyword set. Throws EmptyStore / InvalidArgument (n == 0).
  std::vector<ScoredAuthor> search_candidates(const Article& article, const ArticleMetadata& metadata,
                                              std::size_t n, provider::Provider& provider,
                                              const SearchOptions& options = {}) const;

  /// Same, with a precomputed article embedding.
  std::vector<ScoredAuthor> search_candidates(const Article& article, const provider::Embedding& embedding,
                                              const ArticleMetadata& metadata, std::size_t n,
                                              const SearchOptions& options = {}) const;

  const AuthorRecord& get_author(const std::string& name) const;  ///< throws NotFound
  bool has_author(const std::string& name) const;
  std::vector<std::string> list_authors() const;
  StoreManifest stats() const;

  const Article& get_article(const std::string& id) const;  ///< throws NotFound
  bool has_article(const std::string& id) const;
  /// Sample articles of an author in ingestion order, at most `limit`.
  std::vector<const Article*> samples_of(const std::string& name, std::size_t limit) const;

  /// Top-k non-stopword terms of a text scored with the store's IDF.
  std::vector<Keyword> keywords_for(std::string_view text, std::size_t k = kKeywordsPerAuthor) const;

  bool persistent() const { return !dir_.empty(); }

 private:
  ProfileStore() = default;

  void load();
  void persist();
  void refresh_keywords();
  double idf(const std::string& term) const;

  std::filesystem::path dir_;
  int lock_fd_ = -1;
  bool writable_ = false;
  StoreManifest manifest_;
  std::vector<Article> articles_;
  std::unordered_map<std::string, std::size_t> article_index_;
  std::vector<std::map<std::string, int>> article_terms_;
  std::unordered_map<std::string, int> document_frequency_;
  std::map<std::string, AuthorRecord> authors_;
  std::size_t persisted_articles_ = 0;
};

}  // namespace stylo::store
