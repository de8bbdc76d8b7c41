#include "stylo/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <set>

#include "data_files.hpp"
#include "stylo/text_core.hpp"

namespace stylo::pipeline {

using nlohmann::json;
using matching::MatchResult;
using matching::MatchTarget;
using matching::Subject;
using stylometry::ReferenceStats;

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::microseconds since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string title_case(std::string_view s) {
  std::string out(s);
  bool start = true;
  for (auto& c : out) {
    const auto u = static_cast<unsigned char>(c);
    c = static_cast<char>(start ? std::toupper(u) : std::tolower(u));
    start = !std::isalpha(u);
  }
  return out;
}

constexpr const char* kMonthPattern =
    "(January|February|March|April|May|June|July|August|September|October|November|December|"
    "Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sept|Sep|Oct|Nov|Dec)";

int month_number(std::string_view name) {
  static const std::array<const char*, 12> prefixes{"jan", "feb", "mar", "apr", "may", "jun",
                                                    "jul", "aug", "sep", "oct", "nov", "dec"};
  const auto l = lower(name.substr(0, 3));
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    if (l == prefixes[i]) return static_cast<int>(i) + 1;
  }
  return 0;
}

bool valid_date(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1) return false;
  static const std::array<int, 12> days{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return d <= days[m - 1] + (m == 2 && leap ? 1 : 0);
}

std::string iso_date(int y, int m, int d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

double number_in(const json& j, const char* key, double fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw Error(Errc::InvalidArgument, std::string("config key '") + key + "' must be a number");
  return it->get<double>();
}

std::size_t count_in(const json& j, const char* key, std::size_t fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw Error(Errc::InvalidArgument, std::string("config key '") + key + "' must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

std::string string_in(const json& j, const char* key, const std::string& fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw Error(Errc::InvalidArgument, std::string("config key '") + key + "' must be a string");
  return it->get<std::string>();
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidArgument, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

std::string metadata_bullets(const ArticleMetadata& m) {
  std::string out = "- topic category: " + m.topic_category + "\n";
  out += "- publication date: " + m.publication_date.value_or("unknown") + "\n";
  out += "- publisher origins: ";
  for (std::size_t i = 0; i < m.publisher_origins.size(); ++i) out += (i ? ", " : "") + m.publisher_origins[i];
  if (m.publisher_origins.empty()) out += "unknown";
  out += "\n- geo-location: " + m.geo_location.value_or("unknown");
  return out;
}

void validate_metadata_reply(const json& j) {
  if (!j.is_object()) throw Error(Errc::ParseError, "metadata reply is not an object");
  const auto topic = j.find("topic_category");
  if (topic == j.end() || !(topic->is_string() || topic->is_null())) {
    throw Error(Errc::ParseError, "topic_category must be a string");
  }
  if (const auto d = j.find("publication_date"); d != j.end() && !d->is_null()) {
    if (!d->is_string() || !find_date(d->get<std::string>())) {
      throw Error(Errc::ParseError, "publication_date must be YYYY-MM-DD or null");
    }
  }
  if (const auto p = j.find("publisher_origins"); p != j.end() && !p->is_null()) {
    if (!p->is_array()) throw Error(Errc::ParseError, "publisher_origins must be an array");
    for (const auto& x : *p) {
      if (!x.is_string()) throw Error(Errc::ParseError, "publisher_origins must hold strings");
    }
  }
  if (const auto g = j.find("geo_location"); g != j.end() && !(g->is_null() || g->is_string())) {
    throw Error(Errc::ParseError, "geo_location must be a string or null");
  }
}

std::string join_samples(const std::vector<std::string>& texts) {
  std::string out;
  for (const auto& t : texts) {
    if (!out.empty()) out += "\n\n";
    out += t;
  }
  return out;
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::ZeroShot ? "zero_shot" : "db_augmented"; }

Mode mode_from_string(std::string_view s) {
  auto l = lower(s);
  l.erase(std::remove_if(l.begin(), l.end(), [](char c) { return c == '_' || c == '-'; }), l.end());
  if (l == "zeroshot") return Mode::ZeroShot;
  if (l == "db" || l == "dbaugmented") return Mode::DbAugmented;
  throw Error(Errc::InvalidArgument, "unknown mode '" + std::string(s) + "' (expected zero_shot or db_augmented)");
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
  reject_unknown_keys(j,
                      {"mode", "strategy", "candidates_n", "samples_per_candidate", "alpha", "fallback_cutoff",
                       "decision_threshold", "semantic_source", "provider", "store_path"},
                      "config");
  PipelineConfig c;
  if (j.contains("mode")) c.mode = mode_from_string(string_in(j, "mode", ""));
  if (j.contains("strategy")) c.strategy = matching::strategy_from_string(string_in(j, "strategy", ""));
  c.candidates_n = count_in(j, "candidates_n", c.candidates_n);
  c.samples_per_candidate = count_in(j, "samples_per_candidate", c.samples_per_candidate);
  c.alpha = number_in(j, "alpha", c.alpha);
  c.fallback_cutoff = number_in(j, "fallback_cutoff", c.fallback_cutoff);
  c.decision_threshold = number_in(j, "decision_threshold", c.decision_threshold);
  if (j.contains("semantic_source")) {
    const auto s = lower(string_in(j, "semantic_source", ""));
    if (s == "lexicon") {
      c.semantic_source = stylometry::SemanticSource::Lexicon;
    } else if (s == "provider") {
      c.semantic_source = stylometry::SemanticSource::Provider;
    } else {
      throw Error(Errc::InvalidArgument, "semantic_source must be lexicon or provider");
    }
  }
  c.store_path = string_in(j, "store_path", c.store_path);
  if (const auto p = j.find("provider"); p != j.end()) {
    if (!p->is_object()) throw Error(Errc::InvalidArgument, "config key 'provider' must be an object");
    reject_unknown_keys(*p, {"kind", "base_url", "model", "embed_model", "temperature", "fixtures_path"},
                        "provider config");
    auto& pc = c.provider;
    pc.kind = lower(string_in(*p, "kind", pc.kind));
    pc.base_url = string_in(*p, "base_url", pc.base_url);
    pc.model = string_in(*p, "model", pc.model);
    pc.embed_model = string_in(*p, "embed_model", pc.embed_model);
    pc.fixtures_path = string_in(*p, "fixtures_path", pc.fixtures_path);
    if (const auto t = p->find("temperature"); t != p->end() && !t->is_null()) {
      pc.temperature = number_in(*p, "temperature", 0.0);
    }
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read config " + path.string());
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::InvalidArgument, "config " + path.string() + " is not valid JSON");
  return from_json(j);
}

json PipelineConfig::to_json() const {
  json p{{"kind", provider.kind},
         {"base_url", provider.base_url},
         {"model", provider.model},
         {"embed_model", provider.embed_model},
         {"fixtures_path", provider.fixtures_path}};
  p["temperature"] = provider.temperature ? json(*provider.temperature) : json(nullptr);
  return json{{"mode", to_string(mode)},
              {"strategy", matching::to_string(strategy)},
              {"candidates_n", candidates_n},
              {"samples_per_candidate", samples_per_candidate},
              {"alpha", alpha},
              {"fallback_cutoff", fallback_cutoff},
              {"decision_threshold", decision_threshold},
              {"semantic_source", semantic_source == stylometry::SemanticSource::Lexicon ? "lexicon" : "provider"},
              {"provider", p},
              {"store_path", store_path}};
}

void PipelineConfig::validate() const {
  if (candidates_n < 1) throw Error(Errc::InvalidArgument, "candidates_n must be at least 1");
  if (samples_per_candidate < 1) throw Error(Errc::InvalidArgument, "samples_per_candidate must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in [0, 1]");
  if (!(fallback_cutoff >= -1.0 && fallback_cutoff <= 1.0)) {
    throw Error(Errc::InvalidArgument, "fallback_cutoff must lie in [-1, 1]");
  }
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0)) {
    throw Error(Errc::InvalidArgument, "decision_threshold must lie in [0, 1]");
  }
  if (provider.kind != "stub" && provider.kind != "http") {
    throw Error(Errc::InvalidArgument, "provider kind must be stub or http");
  }
  if (provider.temperature && !(*provider.temperature >= 0.0 && *provider.temperature <= 2.0)) {
    throw Error(Errc::InvalidArgument, "temperature must lie in [0, 2]");
  }
}

std::unique_ptr<provider::Provider> make_provider(const ProviderConfig& config) {
  if (config.kind == "stub") {
    provider::StubOptions options;
    if (!config.fixtures_path.empty()) options.fixtures = provider::StubProvider::load_fixtures(config.fixtures_path);
    return std::make_unique<provider::StubProvider>(std::move(options));
  }
  if (config.kind != "http") throw Error(Errc::InvalidArgument, "unknown provider kind '" + config.kind + "'");
  provider::HttpOptions options;
  options.base_url = config.base_url;
  options.model = config.model;
  options.embed_model = config.embed_model;
  options.temperature = config.temperature;
  const auto env = provider::HttpOptions::from_env();
  options.api_key = env.api_key;
  if (std::getenv("STYLO_BASE_URL")) options.base_url = env.base_url;
  return std::make_unique<provider::HttpProvider>(std::move(options));
}

std::vector<std::string> RiskReport::top_k_authors(std::size_t k) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked_matches.size()); ++i) out.push_back(ranked_matches[i].author);
  return out;
}

json RiskReport::to_json(bool include_timings) const {
  json candidates_json = json::array();
  for (const auto& c : candidates.candidates) {
    candidates_json.push_back({{"author", c.author},
                               {"retrieval_score", c.retrieval_score},
                               {"samples", std::max(c.sample_ids.size(), c.sample_texts.size())}});
  }
  json matches = json::array();
  for (const auto& m : ranked_matches) matches.push_back(matching::to_json(m));
  json ranked = json::array();
  for (const auto& f : reflection.ranked) {
    ranked.push_back({{"feature", stylometry::feature_key(f.feature)},
                      {"z", f.z},
                      {"article_value", f.article_value},
                      {"author_mean", f.author_mean},
                      {"author_spread", f.author_spread},
                      {"explanation", f.explanation}});
  }
  json j{{"article_id", article_id},
         {"mode_requested", to_string(mode_requested)},
         {"mode_used", to_string(mode_used)},
         {"fell_back", candidates.fell_back},
         {"strategy", matching::to_string(strategy)},
         {"metadata", stylo::to_json(metadata)},
         {"candidates", candidates_json},
         {"ranked_matches", matches},
         {"top1", top_k_authors(1)},
         {"top3", top_k_authors(3)},
         {"reflection", {{"author", reflection.author}, {"ranked", ranked}, {"rationale", reflection.rationale}}},
         {"comparisons", comparisons}};
  if (include_timings) {
    j["timings_us"] = {{"extract", timings.extract.count()},
                       {"search", timings.search.count()},
                       {"match", timings.match.count()},
                       {"reflect", timings.reflect.count()}};
  }
  return j;
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), stage + " stage: " + cause.what()), stage_(std::move(stage)) {}

std::optional<std::string> find_date(std::string_view text) {
  static const std::regex month_first(std::string("\\b") + kMonthPattern +
                                          "\\.?\\s+(\\d{1,2})(?:st|nd|rd|th)?,?\\s+(\\d{4})\\b",
                                      std::regex::icase);
  static const std::regex day_first(std::string("\\b(\\d{1,2})(?:st|nd|rd|th)?\\s+") + kMonthPattern +
                                        "\\.?,?\\s+(\\d{4})\\b",
                                    std::regex::icase);
  static const std::regex iso("\\b(\\d{4})-(\\d{2})-(\\d{2})\\b");

  const std::string s(text);
  std::optional<std::pair<std::ptrdiff_t, std::string>> best;
  const auto consider = [&](std::ptrdiff_t pos, int y, int m, int d) {
    if (!valid_date(y, m, d)) return;
    if (!best || pos < best->first) best = {pos, iso_date(y, m, d)};
  };
  for (auto it = std::sregex_iterator(s.begin(), s.end(), month_first); it != std::sregex_iterator(); ++it) {
    consider(it->position(), std::stoi((*it)[3]), month_number((*it)[1].str()), std::stoi((*it)[2]));
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), day_first); it != std::sregex_iterator(); ++it) {
    consider(it->position(), std::stoi((*it)[3]), month_number((*it)[2].str()), std::stoi((*it)[1]));
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), iso); it != std::sregex_iterator(); ++it) {
    consider(it->position(), std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3]));
  }
  if (!best) return std::nullopt;
  return best->second;
}

ArticleMetadata heuristic_metadata(const Article& article, const store::ProfileStore* store) {
  ArticleMetadata m;
  const auto text = article.title.empty() ? article.body : article.title + "\n" + article.body;
  m.publication_date = find_date(text);

  if (store != nullptr && store->stats().article_count > 0) {
    const auto top = store->keywords_for(text, 1);
    if (!top.empty()) m.topic_category = top[0].term;
  } else {
    std::map<std::string, int> tf;
    for (const auto& t : text::tokenize(text)) {
      if (t.kind == text::TokenKind::Word && t.lower.size() >= 3 && !text::is_stopword(t.lower)) ++tf[t.lower];
    }
    int best = 0;
    for (const auto& [term, n] : tf) {
      if (n > best) {
        best = n;
        m.topic_category = term;
      }
    }
  }

  // Wire-style dateline: "WASHINGTON (Reuters) - ..."
  static const std::regex dateline(R"(^\s*([A-Z][A-Z .'-]{1,40}?)\s*(?:,\s*[A-Za-z. ]{2,20})?\s*\(([A-Za-z][A-Za-z&. ]{0,30})\)\s*[-:\xE2])");
  std::smatch match;
  const std::string body = article.body.substr(0, 200);
  if (std::regex_search(body, match, dateline)) {
    m.geo_location = title_case(match[1].str());
    m.publisher_origins.push_back(match[2].str());
  }
  return m;
}

ReflectionReport reflect(const std::string& author, const stylometry::StylometricProfile& article,
                         const ReferenceStats& reference) {
  const auto distance = stylometry::feature_distance(article, reference);
  std::array<std::size_t, stylometry::kNumericFeatureCount> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distance.z[a] < distance.z[b]; });

  ReflectionReport report;
  report.author = author;
  for (const auto i : order) {
    const auto f = stylometry::numeric_features()[i];
    ReflectedFeature r;
    r.feature = f;
    r.z = distance.z[i];
    r.article_value = article.value(f);
    r.author_mean = reference.mean[static_cast<std::size_t>(f)];
    r.author_spread = reference.spread[static_cast<std::size_t>(f)];
    r.explanation = std::string(stylometry::feature_label(f)) + ": article " + stylometry::format_fixed(r.article_value) +
                    ", author " + stylometry::format_fixed(r.author_mean) + " \xC2\xB1 " +
                    stylometry::format_fixed(r.author_spread) + " (z = " + stylometry::format_fixed(r.z, 2) + ")";
    report.ranked.push_back(std::move(r));
  }
  return report;
}

Pipeline::Pipeline(PipelineConfig config, provider::Provider& provider, const store::ProfileStore* store)
    : config_(std::move(config)), provider_(&provider), store_(store) {
  config_.validate();
}

ArticleMetadata Pipeline::extract_metadata(const Article& article) const {
  if (provider_->offline()) return heuristic_metadata(article, store_);
  const auto prompt = detail::render_prompt(
      "metadata_extract.txt", {{"ARTICLE", article.title.empty() ? article.body : article.title + "\n\n" + article.body}});
  json reply;
  try {
    reply = provider::request_json(*provider_, provider::ChatRequest::user(prompt), validate_metadata_reply);
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError) throw Error(Errc::MetadataParseError, e.what());
    throw;
  }
  ArticleMetadata m;
  if (const auto& t = reply["topic_category"]; t.is_string() && !t.get<std::string>().empty()) {
    m.topic_category = t.get<std::string>();
  }
  if (const auto d = reply.find("publication_date"); d != reply.end() && d->is_string()) {
    m.publication_date = find_date(d->get<std::string>());
  }
  if (const auto p = reply.find("publisher_origins"); p != reply.end() && p->is_array()) {
    m.publisher_origins = p->get<std::vector<std::string>>();
  }
  if (const auto g = reply.find("geo_location"); g != reply.end() && g->is_string() && !g->get<std::string>().empty()) {
    m.geo_location = g->get<std::string>();
  }
  return m;
}

CandidateSet Pipeline::zero_shot_search(const ArticleMetadata& metadata) const {
  std::string query;
  const auto add = [&](const std::string& term) {
    if (term.empty()) return;
    if (!query.empty()) query += ' ';
    query += term;
  };
  if (metadata.topic_category != "unknown") add(metadata.topic_category);
  if (metadata.publication_date) add(*metadata.publication_date);
  for (const auto& p : metadata.publisher_origins) add(p);
  if (query.empty()) throw Error(Errc::EmptyCandidates, "no metadata to search the web with");

  const auto n = config_.candidates_n;
  const auto hits = provider_->web_search(query, std::max<std::size_t>(10, 2 * n)).hits;

  CandidateSet set;
  set.mode = Mode::ZeroShot;
  std::vector<std::string> names;
  std::vector<double> scores;
  if (provider_->offline()) {
    // Bylines in the hits, most frequent first, then by first appearance.
    std::vector<std::pair<std::string, int>> counts;
    for (const auto& h : hits) {
      if (!h.author_hint || h.author_hint->empty()) continue;
      auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == *h.author_hint; });
      if (it == counts.end()) {
        counts.emplace_back(*h.author_hint, 1);
      } else {
        ++it->second;
      }
    }
    std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [name, count] : counts) {
      names.push_back(name);
      scores.push_back(static_cast<double>(count) / static_cast<double>(hits.size()));
    }
  } else {
    std::string hit_lines;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      hit_lines += std::to_string(i + 1) + ". " + hits[i].title + " | " + hits[i].snippet + " | " + hits[i].url;
      if (hits[i].author_hint) hit_lines += " | byline: " + *hits[i].author_hint;
      hit_lines += "\n";
    }
    const auto n_text = std::to_string(n);
    const auto prompt = detail::render_prompt(
        "candidate_proposal.txt", {{"METADATA", metadata_bullets(metadata)}, {"HITS", hit_lines}, {"N", n_text}});
    const auto reply = provider::request_json(*provider_, provider::ChatRequest::user(prompt), [](const json& j) {
      const auto it = j.find("candidates");
      if (it == j.end() || !it->is_array()) throw Error(Errc::ParseError, "reply lacks a candidates array");
      for (const auto& c : *it) {
        if (!c.is_string()) throw Error(Errc::ParseError, "candidates must be strings");
      }
    });
    for (const auto& c : reply["candidates"]) {
      const auto name = c.get<std::string>();
      if (name.empty() || std::find(names.begin(), names.end(), name) != names.end()) continue;
      names.push_back(name);
      scores.push_back(1.0 / static_cast<double>(names.size()));
    }
  }
  if (names.size() > n) names.resize(n);

  for (std::size_t i = 0; i < names.size(); ++i) {
    auto c = fetch_candidate(names[i], config_.samples_per_candidate);
    c.retrieval_score = scores[i];
    set.candidates.push_back(std::move(c));
  }
  return set;
}

Candidate Pipeline::fetch_candidate(const std::string& author, std::size_t samples) const {
  Candidate c;
  c.author = author;
  const auto wanted = lower(author);
  for (const auto& h : provider_->web_search(author, samples).hits) {
    if (h.author_hint && lower(*h.author_hint) != wanted) continue;
    if (h.snippet.empty()) continue;
    c.sample_texts.push_back(h.snippet);
    if (c.sample_texts.size() == samples) break;
  }
  return c;
}

CandidateSet Pipeline::search_stage(const Article& article, const ArticleMetadata& metadata,
                                    const Subject& subject) const {
  CandidateSet set;
  if (config_.mode == Mode::DbAugmented && store_ != nullptr && store_->stats().author_count > 0) {
    store::SearchOptions options;
    options.alpha = config_.alpha;
    const auto ranked =
        store_->search_candidates(article, subject.embedding, metadata, config_.candidates_n, options);
    if (!ranked.empty() && ranked.front().score >= config_.fallback_cutoff) {
      set.mode = Mode::DbAugmented;
      for (const auto& r : ranked) {
        const auto& record = store_->get_author(r.name);
        Candidate c;
        c.author = r.name;
        c.retrieval_score = r.score;
        c.profile = record.profile;
        c.centroid = record.centroid;
        for (const auto* sample : store_->samples_of(r.name, config_.samples_per_candidate)) {
          c.sample_ids.push_back(sample->id);
          c.sample_texts.push_back(sample->body);
        }
        set.candidates.push_back(std::move(c));
      }
      return set;
    }
  }
  set = zero_shot_search(metadata);
  set.fell_back = config_.mode == Mode::DbAugmented;
  if (set.candidates.empty()) throw Error(Errc::EmptyCandidates, "web search produced no candidate authors");
  return set;
}

MatchResult Pipeline::match_candidate(const Subject& subject, const Candidate& candidate, Mode mode) const {
  const matching::Matcher matcher(config_.strategy, *provider_, config_.decision_threshold, config_.semantic_source);
  if (mode == Mode::DbAugmented) {
    // One comparison per candidate, against the stored author profile.
    MatchTarget target;
    target.author = candidate.author;
    target.profile = candidate.profile;
    target.centroid = candidate.centroid;
    if (!candidate.sample_texts.empty()) target.sample_texts = {join_samples(candidate.sample_texts)};
    return matcher.match(subject, target);
  }

  MatchResult combined;
  combined.author = candidate.author;
  combined.strategy = config_.strategy;
  if (config_.strategy == matching::Strategy::LDA && !candidate.sample_texts.empty()) {
    combined = matching::match_lda(subject.text, candidate.sample_texts, *provider_, config_.decision_threshold);
    combined.author = candidate.author;
    return combined;
  }
  for (const auto& sample : candidate.sample_texts) {
    MatchTarget target;
    target.author = candidate.author;
    target.sample_texts = {sample};
    ++combined.comparisons_made;
    try {
      const auto r = matcher.match(subject, target);
      combined.evidence.per_reference.push_back(r.likelihood);
      combined.evidence.failed_comparisons += r.evidence.failed_comparisons;
      if (combined.evidence.key_features.empty()) combined.evidence.key_features = r.evidence.key_features;
      if (combined.evidence.rationale.empty()) combined.evidence.rationale = r.evidence.rationale;
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyList && e.code() != Errc::EmptyText) throw;
      combined.evidence.per_reference.push_back(0.0);
      ++combined.evidence.failed_comparisons;
    }
  }
  const auto& scores = combined.evidence.per_reference;
  combined.likelihood =
      scores.empty() ? 0.0 : std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  combined.evidence.flagged = combined.evidence.failed_comparisons == combined.comparisons_made;
  if (config_.strategy == matching::Strategy::SALA) {
    if (const auto ref = reference_of(candidate)) combined.evidence.distance = stylometry::feature_distance(subject.profile, *ref);
  }
  combined.verdict = matching::verdict_for(combined.likelihood, config_.decision_threshold);
  return combined;
}

std::vector<MatchResult> Pipeline::match_stage(const Subject& subject, const CandidateSet& candidates) const {
  if (candidates.candidates.empty()) throw Error(Errc::EmptyCandidates, "no candidates to match");
  std::vector<MatchResult> results;
  results.reserve(candidates.candidates.size());
  for (const auto& c : candidates.candidates) results.push_back(match_candidate(subject, c, candidates.mode));
  std::stable_sort(results.begin(), results.end(), [](const MatchResult& a, const MatchResult& b) {
    if (a.likelihood != b.likelihood) return a.likelihood > b.likelihood;
    return a.author < b.author;
  });
  return results;
}

std::optional<ReferenceStats> Pipeline::reference_of(const Candidate& candidate) const {
  std::optional<stylometry::AggregatedProfile> profile = candidate.profile;
  if (!profile) {
    stylometry::AggregatedProfile built;
    for (const auto& t : candidate.sample_texts) {
      try {
        built.add(stylometry::compute_features(t));
      } catch (const Error& e) {
        if (e.code() != Errc::EmptyText) throw;
      }
    }
    if (built.sample_count() == 0) return std::nullopt;
    profile = std::move(built);
  }
  if (profile->sample_count() == 1) return ReferenceStats::from(profile->means());
  return ReferenceStats::from(*profile);
}

ReflectionReport Pipeline::reflect_stage(const Subject& subject, const Candidate& best) const {
  const auto reference = reference_of(best);
  if (!reference) return ReflectionReport{best.author, {}, {}};
  auto report = reflect(best.author, subject.profile, *reference);
  if (!provider_->offline()) {
    std::string lines;
    for (std::size_t i = 0; i < report.ranked.size(); ++i) {
      lines += std::to_string(i + 1) + ". " + report.ranked[i].explanation + "\n";
    }
    const auto prompt =
        detail::render_prompt("reflection_rationale.txt", {{"AUTHOR", best.author}, {"FEATURES", lines}});
    report.rationale = provider_->chat(provider::ChatRequest::user(prompt));
  }
  return report;
}

RiskReport Pipeline::assess(const Article& article) const {
  RiskReport report;
  report.article_id = article.id;
  report.mode_requested = config_.mode;
  report.strategy = config_.strategy;

  const auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e);
    }
  };

  auto start = Clock::now();
  const auto subject = stage("extract", [&] {
    report.metadata = extract_metadata(article);
    return matching::prepare_subject(article.body, *provider_, config_.semantic_source);
  });
  report.timings.extract = since(start);

  start = Clock::now();
  report.candidates = stage("search", [&] { return search_stage(article, report.metadata, subject); });
  report.mode_used = report.candidates.mode;
  report.timings.search = since(start);

  start = Clock::now();
  report.ranked_matches = stage("match", [&] { return match_stage(subject, report.candidates); });
  for (const auto& m : report.ranked_matches) report.comparisons += m.comparisons_made;
  report.timings.match = since(start);

  start = Clock::now();
  const auto& best_name = report.ranked_matches.front().author;
  const auto best = std::find_if(report.candidates.candidates.begin(), report.candidates.candidates.end(),
                                 [&](const Candidate& c) { return c.author == best_name; });
  report.reflection = stage("reflect", [&] { return reflect_stage(subject, *best); });
  report.timings.reflect = since(start);
  return report;
}

}  // namespace stylo::pipeline
