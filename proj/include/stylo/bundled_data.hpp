#pragma once

#include <optional>
#include <string_view>

namespace stylo::data {

/// Contents of a file shipped under data/, keyed by its relative path
/// (e.g. "stopwords.txt", "prompts/recompose.txt").
std::optional<std::string_view> bundled(std::string_view name);

}  // namespace stylo::data
