#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "stylo/error.hpp"
#include "stylo/provider.hpp"

namespace stylo::provider {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // optional path prefix without trailing slash
};

Endpoint split_base_url(std::string base) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  const auto scheme = base.find("://");
  if (scheme == std::string::npos) throw Error(Errc::InvalidArgument, "base url needs a scheme: " + base);
  const auto slash = base.find('/', scheme + 3);
  if (slash == std::string::npos) return {base, ""};
  return {base.substr(0, slash), base.substr(slash)};
}

class InFlightGuard {
 public:
  explicit InFlightGuard(std::counting_semaphore<64>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightGuard() { sem_.release(); }
  InFlightGuard(const InFlightGuard&) = delete;
  InFlightGuard& operator=(const InFlightGuard&) = delete;

 private:
  std::counting_semaphore<64>& sem_;
};

bool transient(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpOptions HttpOptions::from_env() {
  HttpOptions options;
  if (const char* key = std::getenv("STYLO_API_KEY")) options.api_key = key;
  if (const char* url = std::getenv("STYLO_BASE_URL"); url && *url) options.base_url = url;
  return options;
}

HttpProvider::HttpProvider(HttpOptions options)
    : options_(std::move(options)),
      in_flight_(std::clamp<std::ptrdiff_t>(options_.max_in_flight, 1, 64)) {
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  split_base_url(options_.base_url);
}

json HttpProvider::post(const std::string& path, const json& body) {
  if (options_.api_key.empty()) throw Error(Errc::AuthError, "no API credential configured (STYLO_API_KEY)");
  const auto endpoint = split_base_url(options_.base_url);
  const auto payload = body.dump();
  const httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};

  InFlightGuard guard(in_flight_);
  std::string last_error;
  int last_status = 0;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) options_.sleep(options_.base_delay * (1 << (attempt - 1)));

    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(endpoint.prefix + path, headers, payload, "application/json");
    if (!res) {
      last_status = 0;
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status == 401 || res->status == 403) {
      throw Error(Errc::AuthError, "provider rejected credential (HTTP " + std::to_string(res->status) + ")");
    }
    if (transient(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(Errc::ProviderError, "provider returned HTTP " + std::to_string(res->status) + ": " +
                                           res->body.substr(0, 200));
    }
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw Error(Errc::MalformedResponse, "provider response is not JSON");
    return parsed;
  }
  if (last_status == 429) {
    throw Error(Errc::RateLimited, "rate limited after " + std::to_string(options_.max_attempts) + " attempts");
  }
  throw Error(Errc::ProviderError, "provider unavailable after " + std::to_string(options_.max_attempts) +
                                       " attempts: " + last_error);
}

std::string HttpProvider::do_chat(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const json body{{"model", options_.model},
                  {"messages", messages},
                  {"temperature", options_.temperature.value_or(request.temperature)},
                  {"max_tokens", request.max_tokens}};
  const auto res = post("/v1/chat/completions", body);
  try {
    const auto& content = res.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(Errc::MalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw Error(Errc::MalformedResponse, "chat response lacks choices[0].message.content");
  }
}

Embedding HttpProvider::do_embed(std::string_view text) {
  const json body{{"model", options_.embed_model}, {"input", std::string(text)}};
  const auto res = post("/v1/embeddings", body);
  try {
    Embedding e;
    e.vector = res.at("data").at(0).at("embedding").get<std::vector<double>>();
    return e;
  } catch (const json::exception&) {
    throw Error(Errc::MalformedResponse, "embedding response lacks data[0].embedding");
  }
}

WebSearchResult HttpProvider::do_web_search(std::string_view query, std::size_t limit) {
  const json body{{"query", std::string(query)}, {"limit", limit}};
  const auto res = post(options_.search_path, body);
  WebSearchResult result{std::string(query), {}};
  const auto it = res.find("hits");
  if (it == res.end() || !it->is_array()) throw Error(Errc::MalformedResponse, "search response lacks hits[]");
  for (const auto& h : *it) result.hits.push_back(hit_from_json(h));
  return result;
}

}  // namespace stylo::provider
