#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ptseg/image.hpp"

namespace ptseg {

/// The 256-entry DAVIS annotation palette (0 black, 1 red, 2 green, ...).
const std::array<Rgb, 256>& davis_palette();

/// Reads a palette PNG as per-pixel indices. Any other PNG color type is an
/// invalid_dataset error.
LabelMap read_indexed_png(const std::string& path);
LabelMap decode_indexed_png(const std::vector<std::uint8_t>& bytes);
void write_indexed_png(const std::string& path, const LabelMap& labels);
std::vector<std::uint8_t> encode_indexed_png(const LabelMap& labels);

/// PNG (any color type) or JPEG, converted to 8-bit RGB.
Frame read_image(const std::string& path, int index);
Frame decode_image(const std::vector<std::uint8_t>& bytes, int index);
void write_png(const std::string& path, const Frame& frame);
std::vector<std::uint8_t> encode_png(const Frame& frame);

}  // namespace ptseg
