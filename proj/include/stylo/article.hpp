#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace stylo {

struct Article {
  std::string id;
  std::string title;
  std::string body;
  std::optional<std::string> author;  ///< ground-truth byline, when known
  std::optional<std::string> date;    ///< ISO-8601
  std::optional<std::string> publication;
  std::optional<std::string> topic;
};

nlohmann::json to_json(const Article& a);
/// Throws Error(InvalidArgument) when id or body is missing.
Article article_from_json(const nlohmann::json& j);

struct ArticleMetadata {
  std::string topic_category = "unknown";
  std::optional<std::string> publication_date;  ///< YYYY-MM-DD
  std::vector<std::string> publisher_origins;
  std::optional<std::string> geo_location;
};

nlohmann::json to_json(const ArticleMetadata& m);

}  // namespace stylo
