#pragma once

#include <initializer_list>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

namespace stylo::detail {

/// Non-empty, non-comment lines of a bundled data file. Throws if the file
/// is not bundled.
std::vector<std::string> data_lines(std::string_view name);

/// data_lines split on tabs.
std::vector<std::vector<std::string>> data_rows(std::string_view name);

/// A bundled prompt template with every {{KEY}} replaced.
std::string render_prompt(std::string_view name,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> values);

}  // namespace stylo::detail
