#include "data_files.hpp"

#include <sstream>

#include "stylo/bundled_data.hpp"
#include "stylo/error.hpp"

namespace stylo {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyText: return "EmptyText";
    case Errc::EmptyList: return "EmptyList";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ProviderError: return "ProviderError";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::NoFixture: return "NoFixture";
    case Errc::ParseError: return "ParseError";
    case Errc::MetadataParseError: return "MetadataParseError";
    case Errc::StoreLocked: return "StoreLocked";
    case Errc::EmptyStore: return "EmptyStore";
    case Errc::NotFound: return "NotFound";
    case Errc::MissingAuthor: return "MissingAuthor";
    case Errc::EmptyCandidates: return "EmptyCandidates";
    case Errc::UtilityBelowFloor: return "UtilityBelowFloor";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::IoError: return "IoError";
    case Errc::HeaderMismatch: return "HeaderMismatch";
  }
  return "Unknown";
}

namespace detail {

namespace {

std::string_view require(std::string_view name) {
  auto content = data::bundled(name);
  if (!content) throw Error(Errc::NotFound, "bundled data file missing: " + std::string(name));
  return *content;
}

}  // namespace

std::vector<std::string> data_lines(std::string_view name) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(require(name))};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::vector<std::string>> data_rows(std::string_view name) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : data_lines(name)) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string render_prompt(std::string_view name,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out(require("prompts/" + std::string(name)));
  for (const auto& [key, value] : values) {
    const std::string placeholder = "{{" + std::string(key) + "}}";
    for (auto pos = out.find(placeholder); pos != std::string::npos;
         pos = out.find(placeholder, pos + value.size())) {
      out.replace(pos, placeholder.size(), value);
    }
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

}  // namespace detail
}  // namespace stylo
