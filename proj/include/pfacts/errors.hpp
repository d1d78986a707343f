#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pfacts {

// Broad failure classes. The CLI maps each one to a distinct exit status.
enum class ErrorCategory {
  kConfig,
  kParse,
  kData,
  kIo,
  kEmbedding,
  kTransport,
  kProtocol,
  kModel,
  kNumeric,
  kSchema,
};

const char* category_name(ErrorCategory category);
int exit_code(ErrorCategory category);

// Base for every error raised by the library. `kind()` is the specific
// error name (e.g. "UnknownEnumValue"), stable enough to be grepped.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(message),
        category_(category),
        kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

}  // namespace pfacts
