#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ptseg {

enum class ErrorKind {
  invalid_input,
  empty_mask,
  transport,
  protocol,
  unsupported_capability,
  invalid_dataset,
  not_found,
  precondition,
};

std::string_view to_string(ErrorKind kind);
ErrorKind error_kind_from_string(std::string_view name);

/// Single exception type for the engine; `kind()` carries the category so
/// callers (and the wire protocol) can map failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace ptseg
