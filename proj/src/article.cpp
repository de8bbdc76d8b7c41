#include "stylo/article.hpp"

#include "stylo/error.hpp"

namespace stylo {

using nlohmann::json;

namespace {

void put_optional(json& j, const char* key, const std::optional<std::string>& value) {
  if (value) j[key] = *value;
}

std::optional<std::string> get_optional(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(Errc::InvalidArgument, std::string("article field '") + key + "' must be a string");
  auto s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

json to_json(const Article& a) {
  json j{{"id", a.id}, {"title", a.title}, {"body", a.body}};
  put_optional(j, "author", a.author);
  put_optional(j, "date", a.date);
  put_optional(j, "publication", a.publication);
  put_optional(j, "topic", a.topic);
  return j;
}

Article article_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "article must be a JSON object");
  Article a;
  const auto id = j.find("id");
  if (id == j.end()) throw Error(Errc::InvalidArgument, "article lacks an id");
  a.id = id->is_string() ? id->get<std::string>() : id->dump();
  a.title = get_optional(j, "title").value_or("");
  // Datasets call the body "content"; the store writes "body".
  auto body = get_optional(j, "body");
  if (!body) body = get_optional(j, "content");
  if (!body) throw Error(Errc::InvalidArgument, "article " + a.id + " lacks a body");
  a.body = std::move(*body);
  a.author = get_optional(j, "author");
  a.date = get_optional(j, "date");
  a.publication = get_optional(j, "publication");
  a.topic = get_optional(j, "topic");
  return a;
}

json to_json(const ArticleMetadata& m) {
  json j{{"topic_category", m.topic_category}, {"publisher_origins", m.publisher_origins}};
  j["publication_date"] = m.publication_date ? json(*m.publication_date) : json(nullptr);
  j["geo_location"] = m.geo_location ? json(*m.geo_location) : json(nullptr);
  return j;
}

}  // namespace stylo
