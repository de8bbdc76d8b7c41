#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stylo {

enum class Errc {
  InvalidArgument,
  EmptyText,
  EmptyList,
  DimMismatch,
  ProviderError,
  AuthError,
  RateLimited,
  MalformedResponse,
  NoFixture,
  ParseError,
  MetadataParseError,
  StoreLocked,
  EmptyStore,
  NotFound,
  MissingAuthor,
  EmptyCandidates,
  UtilityBelowFloor,
  UnknownTarget,
  IoError,
  HeaderMismatch,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace stylo
