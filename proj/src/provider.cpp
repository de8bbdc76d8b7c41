#include "stylo/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "data_files.hpp"
#include "stylo/error.hpp"
#include "stylo/text_core.hpp"

namespace stylo::provider {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(Errc::InvalidArgument, "chat request has no messages");
  if (messages.back().role != Role::User) {
    throw Error(Errc::InvalidArgument, "chat request must end with a user message");
  }
}

ChatRequest ChatRequest::user(std::string prompt, double temperature) {
  ChatRequest req;
  req.messages.push_back({Role::User, std::move(prompt)});
  req.temperature = temperature;
  return req;
}

void Embedding::validate() const {
  if (vector.empty()) throw Error(Errc::MalformedResponse, "embedding has zero dimensions");
  for (const double v : vector) {
    if (!std::isfinite(v)) throw Error(Errc::MalformedResponse, "embedding contains non-finite values");
  }
}

double l2_norm(const Embedding& e) {
  double sum = 0.0;
  for (const double v : e.vector) sum += v * v;
  return std::sqrt(sum);
}

void normalize(Embedding& e) {
  const double norm = l2_norm(e);
  if (norm == 0.0) return;
  for (double& v : e.vector) v /= norm;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(Errc::DimMismatch, "embedding dimensions differ: " + std::to_string(a.dim()) +
                                       " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a.vector[i] * b.vector[i];
  const double denom = l2_norm(a) * l2_norm(b);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

json to_json(const SearchHit& hit) {
  json j{{"title", hit.title}, {"snippet", hit.snippet}, {"url", hit.url}};
  j["author_hint"] = hit.author_hint ? json(*hit.author_hint) : json(nullptr);
  return j;
}

SearchHit hit_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::MalformedResponse, "search hit is not an object");
  SearchHit hit;
  hit.title = j.value("title", "");
  hit.snippet = j.value("snippet", "");
  hit.url = j.value("url", "");
  if (hit.url.rfind("http://", 0) != 0 && hit.url.rfind("https://", 0) != 0) {
    throw Error(Errc::MalformedResponse, "search hit has malformed url: '" + hit.url + "'");
  }
  if (auto it = j.find("author_hint"); it != j.end() && it->is_string() && !it->get<std::string>().empty()) {
    hit.author_hint = it->get<std::string>();
  }
  return hit;
}

std::string Provider::chat(const ChatRequest& request) {
  request.validate();
  ++chat_calls_;
  return do_chat(request);
}

Embedding Provider::embed(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(Errc::EmptyText, "cannot embed empty text");
  }
  ++embed_calls_;
  auto e = do_embed(text);
  e.validate();
  return e;
}

WebSearchResult Provider::web_search(std::string_view query, std::size_t limit) {
  if (limit < 1) throw Error(Errc::InvalidArgument, "web search limit must be >= 1");
  ++search_calls_;
  auto result = do_web_search(query, limit);
  if (result.hits.size() > limit) result.hits.resize(limit);
  return result;
}

CallCounters Provider::counters() const {
  return {chat_calls_.load(), embed_calls_.load(), search_calls_.load()};
}

Embedding hashed_embedding(std::string_view text, std::size_t dim) {
  Embedding e;
  e.vector.assign(dim, 0.0);
  bool any = false;
  for (const auto& token : text::tokenize(text)) {
    if (token.kind == text::TokenKind::Punctuation) continue;
    e.vector[text::stable_hash(token.lower) % dim] += 1.0;
    any = true;
  }
  if (!any) throw Error(Errc::EmptyText, "text has no words to embed");
  normalize(e);
  return e;
}

StubProvider::StubProvider(StubOptions options) : options_(std::move(options)) {
  if (!options_.fixtures.is_object()) {
    throw Error(Errc::InvalidArgument, "stub fixtures must be a JSON object");
  }
}

json StubProvider::load_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open fixture file " + path.string());
  try {
    auto j = json::parse(in);
    if (!j.is_object()) throw Error(Errc::IoError, "fixture file must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(Errc::IoError, "fixture file " + path.string() + ": " + e.what());
  }
}

std::string StubProvider::do_chat(const ChatRequest& request) {
  std::string material;
  for (const auto& m : request.messages) {
    material += to_string(m.role);
    material += '\x1f';
    material += m.content;
    material += '\x1e';
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(text::stable_hash(material)));
  return "stub-response-" + std::string(buf);
}

Embedding StubProvider::do_embed(std::string_view text) {
  return hashed_embedding(text, options_.embedding_dim);
}

WebSearchResult StubProvider::do_web_search(std::string_view query, std::size_t limit) {
  std::set<std::string> query_terms;
  for (const auto& t : text::tokenize(query)) {
    if (t.kind != text::TokenKind::Punctuation) query_terms.insert(t.lower);
  }
  WebSearchResult result{std::string(query), {}};
  std::set<std::string> seen_urls;
  bool matched = false;
  for (const auto& [key, hits] : options_.fixtures.items()) {
    const auto key_tokens = text::tokenize(key);
    const bool all_present = !key_tokens.empty() &&
        std::all_of(key_tokens.begin(), key_tokens.end(), [&](const text::Token& t) {
          return t.kind == text::TokenKind::Punctuation || query_terms.contains(t.lower);
        });
    if (!all_present) continue;
    matched = true;
    for (const auto& h : hits) {
      auto hit = hit_from_json(h);
      if (seen_urls.insert(hit.url).second) result.hits.push_back(std::move(hit));
    }
  }
  if (!matched && options_.strict) {
    throw Error(Errc::NoFixture, "no stub fixture matches query '" + std::string(query) + "'");
  }
  if (result.hits.size() > limit) result.hits.resize(limit);
  return result;
}

std::optional<json> extract_json_object(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto parsed = json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

json request_json(Provider& provider, const ChatRequest& request,
                  const std::function<void(const json&)>& validate) {
  auto attempt = [&](const std::string& reply) -> std::optional<json> {
    auto parsed = extract_json_object(reply);
    if (!parsed) return std::nullopt;
    try {
      validate(*parsed);
    } catch (const Error& e) {
      if (e.code() != Errc::ParseError) throw;
      return std::nullopt;
    } catch (const json::exception&) {
      return std::nullopt;
    }
    return parsed;
  };

  const auto first = provider.chat(request);
  if (auto ok = attempt(first)) return *ok;

  ChatRequest retry = request;
  retry.messages.push_back({Role::Assistant, first});
  retry.messages.push_back({Role::User, detail::render_prompt("reformat.txt", {})});
  const auto second = provider.chat(retry);
  if (auto ok = attempt(second)) return *ok;
  throw Error(Errc::ParseError, "provider reply is not the requested JSON object after one retry");
}

}  // namespace stylo::provider
