#include "ptseg/base64.hpp"

#include <sodium.h>

#include "ptseg/error.hpp"

namespace ptseg {

std::string base64_encode(std::span<const std::uint8_t> data) {
  const std::size_t len = sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, data.data(), data.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t written = 0;
  const char* end = nullptr;
  const int rc = sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr,
                                   &written, &end, sodium_base64_VARIANT_ORIGINAL);
  require(rc == 0 && end == text.data() + text.size(), ErrorKind::invalid_input, "malformed base64");
  out.resize(written);
  return out;
}

}  // namespace ptseg
