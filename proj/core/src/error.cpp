#include "ptseg/error.hpp"

#include <array>
#include <utility>

namespace ptseg {
namespace {

constexpr std::array<std::pair<ErrorKind, std::string_view>, 8> kNames{{
    {ErrorKind::invalid_input, "invalid_input"},
    {ErrorKind::empty_mask, "empty_mask"},
    {ErrorKind::transport, "transport"},
    {ErrorKind::protocol, "protocol"},
    {ErrorKind::unsupported_capability, "unsupported_capability"},
    {ErrorKind::invalid_dataset, "invalid_dataset"},
    {ErrorKind::not_found, "not_found"},
    {ErrorKind::precondition, "precondition"},
}};

}  // namespace

std::string_view to_string(ErrorKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ErrorKind error_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return ErrorKind::protocol;
}

}  // namespace ptseg
