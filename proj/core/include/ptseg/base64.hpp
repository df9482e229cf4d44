#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ptseg {

/// Standard alphabet with padding.
std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws invalid_input on malformed text.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace ptseg
