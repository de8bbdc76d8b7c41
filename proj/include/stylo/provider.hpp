#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

// Chat completion, embeddings and web search behind one interface, with an
// OpenAI-compatible HTTP client and a deterministic offline stub.
namespace stylo::provider {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct Message {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  /// Throws InvalidArgument unless non-empty and ending with a user turn.
  void validate() const;

  static ChatRequest user(std::string prompt, double temperature = 0.0);
};

struct Embedding {
  std::vector<double> vector;

  std::size_t dim() const { return vector.size(); }
  /// Throws MalformedResponse when empty or non-finite.
  void validate() const;
};

double cosine(const Embedding& a, const Embedding& b);
double l2_norm(const Embedding& e);
void normalize(Embedding& e);

struct SearchHit {
  std::string title;
  std::string snippet;
  std::string url;
  std::optional<std::string> author_hint;
};

struct WebSearchResult {
  std::string query;
  std::vector<SearchHit> hits;
};

nlohmann::json to_json(const SearchHit& hit);
SearchHit hit_from_json(const nlohmann::json& j);

struct CallCounters {
  std::size_t chat = 0;
  std::size_t embed = 0;
  std::size_t search = 0;
};

enum class ProviderKind { Stub, Http };

class Provider {
 public:
  virtual ~Provider() = default;

  std::string chat(const ChatRequest& request);
  Embedding embed(std::string_view text);
  WebSearchResult web_search(std::string_view query, std::size_t limit);

  virtual ProviderKind kind() const = 0;
  bool offline() const { return kind() == ProviderKind::Stub; }

  CallCounters counters() const;

 protected:
  virtual std::string do_chat(const ChatRequest& request) = 0;
  virtual Embedding do_embed(std::string_view text) = 0;
  virtual WebSearchResult do_web_search(std::string_view query, std::size_t limit) = 0;

 private:
  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
  std::atomic<std::size_t> search_calls_{0};
};

/// Deterministic bag-of-words embedding: each lower-cased word or number is
/// hashed into one of `dim` buckets and the count vector is L2-normalized.
Embedding hashed_embedding(std::string_view text, std::size_t dim = 256);

struct StubOptions {
  /// Maps a query keyword (one or more words) to the hits it serves.
  nlohmann::json fixtures = nlohmann::json::object();
  /// Unknown queries raise NoFixture instead of returning no hits.
  bool strict = false;
  std::size_t embedding_dim = 256;
};

class StubProvider final : public Provider {
 public:
  explicit StubProvider(StubOptions options = {});

  static nlohmann::json load_fixtures(const std::filesystem::path& path);

  ProviderKind kind() const override { return ProviderKind::Stub; }

 protected:
  std::string do_chat(const ChatRequest& request) override;
  Embedding do_embed(std::string_view text) override;
  WebSearchResult do_web_search(std::string_view query, std::size_t limit) override;

 private:
  StubOptions options_;
};

struct HttpOptions {
  std::string base_url = "https://api.openai.com";
  std::string api_key;
  std::string model = "gpt-4.1";
  std::string embed_model = "text-embedding-3-small";
  std::string search_path = "/v1/search";
  /// Overrides every request's temperature when set.
  std::optional<double> temperature;
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::seconds timeout{120};
  std::ptrdiff_t max_in_flight = 4;
  /// Called between attempts; replaced in tests to observe backoff.
  std::function<void(std::chrono::milliseconds)> sleep;

  /// Fills base_url/api_key from STYLO_BASE_URL / STYLO_API_KEY.
  static HttpOptions from_env();
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpOptions options);

  ProviderKind kind() const override { return ProviderKind::Http; }

 protected:
  std::string do_chat(const ChatRequest& request) override;
  Embedding do_embed(std::string_view text) override;
  WebSearchResult do_web_search(std::string_view query, std::size_t limit) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  HttpOptions options_;
  std::counting_semaphore<64> in_flight_;
};

/// Sends `request`, extracts a JSON object from the reply and runs
/// `validate` on it (which throws Error(ParseError) on schema violations).
/// A failed parse triggers exactly one reformat request. Throws ParseError
/// when the second reply also fails.
nlohmann::json request_json(Provider& provider, const ChatRequest& request,
                            const std::function<void(const nlohmann::json&)>& validate);

/// First JSON object in a model reply, tolerating code fences and prose.
std::optional<nlohmann::json> extract_json_object(std::string_view reply);

}  // namespace stylo::provider
