#include "stylo/profile_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "stylo/error.hpp"
#include "stylo/text_core.hpp"

namespace stylo::store {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kArticles = "articles.jsonl";
constexpr const char* kAuthors = "authors.jsonl";
constexpr const char* kLock = "lock";

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomically(const fs::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw Error(Errc::IoError, "short write to " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

std::vector<json> read_jsonl(const fs::path& path, std::size_t limit) {
  std::vector<json> rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) return rows;
  std::string line;
  while (rows.size() < limit && std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::IoError, "corrupt line in " + path.string());
    rows.push_back(std::move(j));
  }
  return rows;
}

/// Lower-cased content terms: words of two or more characters that are not stopwords.
std::map<std::string, int> content_terms(std::string_view text) {
  std::map<std::string, int> terms;
  for (const auto& t : text::tokenize(text)) {
    if (t.kind != text::TokenKind::Word || t.lower.size() < 2 || text::is_stopword(t.lower)) continue;
    ++terms[t.lower];
  }
  return terms;
}

std::vector<Keyword> top_keywords(std::vector<Keyword> scored, std::size_t k) {
  std::sort(scored.begin(), scored.end(), [](const Keyword& a, const Keyword& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.term < b.term;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::string embedding_text(const Article& a) { return a.body; }

}  // namespace

json AuthorRecord::to_json() const {
  json kw = json::array();
  for (const auto& k : keywords) kw.push_back({k.term, k.score});
  return json{{"name", name},
              {"sample_ids", sample_ids},
              {"profile", profile.to_json()},
              {"embedding_sum", embedding_sum},
              {"keywords", kw}};
}

AuthorRecord AuthorRecord::from_json(const json& j) {
  AuthorRecord r;
  r.name = j.at("name").get<std::string>();
  r.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
  r.profile = stylometry::AggregatedProfile::from_json(j.at("profile"));
  r.embedding_sum = j.at("embedding_sum").get<std::vector<double>>();
  for (const auto& k : j.at("keywords")) r.keywords.push_back({k.at(0).get<std::string>(), k.at(1).get<double>()});
  r.centroid.vector = r.embedding_sum;
  if (provider::l2_norm(r.centroid) > 0.0) provider::normalize(r.centroid);
  return r;
}

json to_json(const IngestSummary& s) {
  return json{{"authors_added", s.authors_added}, {"articles_added", s.articles_added},
              {"skipped", s.skipped},             {"missing_author", s.missing_author},
              {"duplicates", s.duplicates},       {"excluded", s.excluded},
              {"invalid", s.invalid},             {"warnings", s.warnings}};
}

json to_json(const StoreManifest& m) {
  return json{{"version", m.version},     {"embedding_dim", m.embedding_dim}, {"author_count", m.author_count},
              {"article_count", m.article_count}, {"created", m.created},   {"updated", m.updated}};
}

ProfileStore ProfileStore::in_memory() {
  ProfileStore s;
  s.writable_ = true;
  s.manifest_.created = s.manifest_.updated = utc_now();
  return s;
}

ProfileStore ProfileStore::open(const fs::path& dir, Access access) {
  ProfileStore s;
  s.dir_ = dir;
  s.writable_ = access == Access::ReadWrite;
  std::error_code ec;
  if (!fs::exists(dir, ec)) {
    if (!s.writable_) throw Error(Errc::IoError, "no store at " + dir.string());
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  }
  const auto lock_path = dir / kLock;
  s.lock_fd_ = ::open(lock_path.c_str(), s.writable_ ? (O_RDWR | O_CREAT) : O_RDONLY, 0644);
  if (s.lock_fd_ < 0) {
    if (!s.writable_ && errno == ENOENT) throw Error(Errc::IoError, "no store at " + dir.string());
    throw Error(Errc::IoError, "cannot open " + lock_path.string() + ": " + std::strerror(errno));
  }
  if (::flock(s.lock_fd_, (s.writable_ ? LOCK_EX : LOCK_SH) | LOCK_NB) != 0) {
    throw Error(Errc::StoreLocked, "store " + dir.string() + " is locked by another process");
  }
  s.load();
  return s;
}

ProfileStore::ProfileStore(ProfileStore&& other) noexcept { *this = std::move(other); }

ProfileStore& ProfileStore::operator=(ProfileStore&& other) noexcept {
  if (this == &other) return *this;
  if (lock_fd_ >= 0) ::close(lock_fd_);
  dir_ = std::move(other.dir_);
  lock_fd_ = std::exchange(other.lock_fd_, -1);
  writable_ = other.writable_;
  manifest_ = std::move(other.manifest_);
  articles_ = std::move(other.articles_);
  article_index_ = std::move(other.article_index_);
  article_terms_ = std::move(other.article_terms_);
  document_frequency_ = std::move(other.document_frequency_);
  authors_ = std::move(other.authors_);
  persisted_articles_ = other.persisted_articles_;
  other.dir_.clear();
  return *this;
}

ProfileStore::~ProfileStore() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void ProfileStore::load() {
  const auto manifest_path = dir_ / kManifest;
  if (!fs::exists(manifest_path)) {
    manifest_.created = manifest_.updated = utc_now();
    if (writable_) persist();
    return;
  }
  std::ifstream in(manifest_path, std::ios::binary);
  const auto m = json::parse(in, nullptr, false);
  if (m.is_discarded()) throw Error(Errc::IoError, "corrupt manifest in " + dir_.string());
  try {
    manifest_.version = m.at("version").get<int>();
    manifest_.embedding_dim = m.at("embedding_dim").get<std::size_t>();
    manifest_.article_count = m.at("article_count").get<std::size_t>();
    manifest_.author_count = m.at("author_count").get<std::size_t>();
    manifest_.created = m.value("created", "");
    manifest_.updated = m.value("updated", "");

    // Lines past the manifest's count come from an interrupted write and are dropped.
    const auto rows = read_jsonl(dir_ / kArticles, manifest_.article_count);
    if (rows.size() != manifest_.article_count) {
      throw Error(Errc::IoError, "store " + dir_.string() + " is missing articles");
    }
    for (const auto& row : rows) {
      articles_.push_back(article_from_json(row));
      article_index_.emplace(articles_.back().id, articles_.size() - 1);
      article_terms_.push_back(content_terms(articles_.back().title + "\n" + articles_.back().body));
      for (const auto& [term, _] : article_terms_.back()) ++document_frequency_[term];
    }
    persisted_articles_ = articles_.size();
    for (const auto& row : read_jsonl(dir_ / kAuthors, manifest_.author_count)) {
      auto record = AuthorRecord::from_json(row);
      authors_.emplace(record.name, std::move(record));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::IoError, "corrupt store " + dir_.string() + ": " + e.what());
  }
  if (authors_.size() != manifest_.author_count) {
    throw Error(Errc::IoError, "store " + dir_.string() + " is missing authors");
  }
  if (writable_) {
    // Trim any torn tail so later appends start on a clean line.
    std::ostringstream articles;
    for (const auto& a : articles_) articles << to_json(a).dump() << '\n';
    write_atomically(dir_ / kArticles, articles.str());
  }
}

void ProfileStore::persist() {
  manifest_.author_count = authors_.size();
  manifest_.article_count = articles_.size();
  manifest_.updated = utc_now();
  if (!persistent()) return;

  {
    std::ofstream out(dir_ / kArticles, std::ios::binary | std::ios::app);
    if (!out) throw Error(Errc::IoError, "cannot append to " + (dir_ / kArticles).string());
    for (std::size_t i = persisted_articles_; i < articles_.size(); ++i) out << to_json(articles_[i]).dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::IoError, "short write to " + (dir_ / kArticles).string());
  }
  persisted_articles_ = articles_.size();

  std::ostringstream authors;
  for (const auto& [_, record] : authors_) authors << record.to_json().dump() << '\n';
  write_atomically(dir_ / kAuthors, authors.str());
  // The manifest goes last: it is the commit point for the other two files.
  write_atomically(dir_ / kManifest, to_json(manifest_).dump(2) + "\n");
}

double ProfileStore::idf(const std::string& term) const {
  const auto it = document_frequency_.find(term);
  const double df = it == document_frequency_.end() ? 0.0 : it->second;
  return std::log((1.0 + static_cast<double>(articles_.size())) / (1.0 + df)) + 1.0;
}

void ProfileStore::refresh_keywords() {
  for (auto& [_, record] : authors_) {
    std::map<std::string, int> tf;
    for (const auto& id : record.sample_ids) {
      for (const auto& [term, n] : article_terms_[article_index_.at(id)]) tf[term] += n;
    }
    std::vector<Keyword> scored;
    scored.reserve(tf.size());
    for (const auto& [term, n] : tf) scored.push_back({term, n * idf(term)});
    record.keywords = top_keywords(std::move(scored), kKeywordsPerAuthor);
  }
}

std::vector<Keyword> ProfileStore::keywords_for(std::string_view text, std::size_t k) const {
  std::vector<Keyword> scored;
  for (const auto& [term, n] : content_terms(text)) scored.push_back({term, n * idf(term)});
  return top_keywords(std::move(scored), k);
}

IngestSummary ProfileStore::warm_up(std::span<const Article> articles, provider::Provider& provider,
                                    const IngestOptions& options) {
  if (!writable_) throw Error(Errc::InvalidArgument, "store is open read-only");
  const std::unordered_set<std::string> excluded(options.exclude_authors.begin(), options.exclude_authors.end());
  IngestSummary summary;
  const auto skip = [&](std::size_t& bucket, std::string warning) {
    ++bucket;
    ++summary.skipped;
    if (!warning.empty()) summary.warnings.push_back(std::move(warning));
  };

  for (const auto& article : articles) {
    if (article.id.empty()) {
      skip(summary.invalid, "article without an id");
      continue;
    }
    if (!article.author || article.author->find_first_not_of(" \t\r\n") == std::string::npos) {
      skip(summary.missing_author, "article " + article.id + " has no author byline");
      continue;
    }
    if (excluded.count(*article.author)) {
      skip(summary.excluded, "");
      continue;
    }
    if (article_index_.count(article.id)) {
      skip(summary.duplicates, "");
      continue;
    }

    // Everything that can fail happens before the store is touched.
    stylometry::StylometricProfile features;
    try {
      features = stylometry::compute_features(article.body, options.semantic_source, &provider);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyText) throw;
      skip(summary.invalid, "article " + article.id + " has no words");
      continue;
    }
    auto embedding = provider.embed(embedding_text(article));
    embedding.validate();
    if (manifest_.embedding_dim == 0) manifest_.embedding_dim = embedding.dim();
    if (embedding.dim() != manifest_.embedding_dim) {
      throw Error(Errc::DimMismatch, "embedding dimension " + std::to_string(embedding.dim()) +
                                         " does not match the store's " + std::to_string(manifest_.embedding_dim));
    }

    auto [it, inserted] = authors_.try_emplace(*article.author);
    auto& record = it->second;
    if (inserted) {
      record.name = *article.author;
      record.embedding_sum.assign(manifest_.embedding_dim, 0.0);
      ++summary.authors_added;
    }
    record.sample_ids.push_back(article.id);
    record.profile.add(features);
    for (std::size_t i = 0; i < embedding.dim(); ++i) record.embedding_sum[i] += embedding.vector[i];
    record.centroid.vector = record.embedding_sum;
    if (provider::l2_norm(record.centroid) > 0.0) provider::normalize(record.centroid);

    articles_.push_back(article);
    article_index_.emplace(article.id, articles_.size() - 1);
    article_terms_.push_back(content_terms(article.title + "\n" + article.body));
    for (const auto& [term, _] : article_terms_.back()) ++document_frequency_[term];
    ++summary.articles_added;
  }
  refresh_keywords();
  persist();
  return summary;
}

std::vector<ScoredAuthor> ProfileStore::search_candidates(const Article& article, const ArticleMetadata& metadata,
                                                          std::size_t n, provider::Provider& provider,
                                                          const SearchOptions& options) const {
  if (authors_.empty()) throw Error(Errc::EmptyStore, "the profile store has no authors");
  return search_candidates(article, provider.embed(embedding_text(article)), metadata, n, options);
}

std::vector<ScoredAuthor> ProfileStore::search_candidates(const Article& article,
                                                          const provider::Embedding& embedding,
                                                          const ArticleMetadata& metadata, std::size_t n,
                                                          const SearchOptions& options) const {
  if (authors_.empty()) throw Error(Errc::EmptyStore, "the profile store has no authors");
  if (n == 0) throw Error(Errc::InvalidArgument, "candidate count must be positive");
  if (options.alpha < 0.0 || options.alpha > 1.0) throw Error(Errc::InvalidArgument, "alpha must lie in [0, 1]");

  std::set<std::string> query;
  for (const auto& k : keywords_for(article.title + "\n" + article.body)) query.insert(k.term);
  if (metadata.topic_category != "unknown") {
    for (const auto& [term, _] : content_terms(metadata.topic_category)) query.insert(term);
  }
  for (const auto& origin : metadata.publisher_origins) {
    for (const auto& [term, _] : content_terms(origin)) query.insert(term);
  }

  std::vector<ScoredAuthor> scored;
  scored.reserve(authors_.size());
  for (const auto& [name, record] : authors_) {
    std::set<std::string> terms;
    for (const auto& k : record.keywords) terms.insert(k.term);
    ScoredAuthor s;
    s.name = name;
    s.keyword_score = jaccard(query, terms);
    s.embedding_score = provider::cosine(embedding, record.centroid);
    s.score = options.alpha * s.keyword_score + (1.0 - options.alpha) * s.embedding_score;
    scored.push_back(std::move(s));
  }
  const auto take = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const ScoredAuthor& a, const ScoredAuthor& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.name < b.name;
                    });
  scored.resize(take);
  return scored;
}

const AuthorRecord& ProfileStore::get_author(const std::string& name) const {
  const auto it = authors_.find(name);
  if (it == authors_.end()) throw Error(Errc::NotFound, "no author named '" + name + "'");
  return it->second;
}

bool ProfileStore::has_author(const std::string& name) const { return authors_.count(name) > 0; }

std::vector<std::string> ProfileStore::list_authors() const {
  std::vector<std::string> names;
  names.reserve(authors_.size());
  for (const auto& [name, _] : authors_) names.push_back(name);
  return names;
}

StoreManifest ProfileStore::stats() const {
  auto m = manifest_;
  m.author_count = authors_.size();
  m.article_count = articles_.size();
  return m;
}

const Article& ProfileStore::get_article(const std::string& id) const {
  const auto it = article_index_.find(id);
  if (it == article_index_.end()) throw Error(Errc::NotFound, "no article with id '" + id + "'");
  return articles_[it->second];
}

bool ProfileStore::has_article(const std::string& id) const { return article_index_.count(id) > 0; }

std::vector<const Article*> ProfileStore::samples_of(const std::string& name, std::size_t limit) const {
  const auto& record = get_author(name);
  std::vector<const Article*> out;
  for (const auto& id : record.sample_ids) {
    if (out.size() >= limit) break;
    out.push_back(&articles_[article_index_.at(id)]);
  }
  return out;
}

}  // namespace stylo::store
