#pragma once

// An "online" provider whose chat replies come from a script. Embeddings are
// the stub's hashed bag of words; searches return nothing unless a handler
// is set.

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "stylo/provider.hpp"

namespace testing {

class ScriptedProvider final : public stylo::provider::Provider {
 public:
  /// Replies are consumed in order; once exhausted, `fallback` answers.
  std::deque<std::string> replies;
  std::function<std::string(const stylo::provider::ChatRequest&)> fallback = [](const auto&) {
    return std::string("not json");
  };
  std::function<stylo::provider::WebSearchResult(std::string_view, std::size_t)> search;
  std::vector<std::string> prompts;

  stylo::provider::ProviderKind kind() const override { return stylo::provider::ProviderKind::Http; }

 protected:
  std::string do_chat(const stylo::provider::ChatRequest& request) override {
    prompts.push_back(request.messages.back().content);
    if (replies.empty()) return fallback(request);
    auto r = std::move(replies.front());
    replies.pop_front();
    return r;
  }
  stylo::provider::Embedding do_embed(std::string_view text) override {
    return stylo::provider::hashed_embedding(text);
  }
  stylo::provider::WebSearchResult do_web_search(std::string_view query, std::size_t limit) override {
    if (search) return search(query, limit);
    return {std::string(query), {}};
  }
};

}  // namespace testing
