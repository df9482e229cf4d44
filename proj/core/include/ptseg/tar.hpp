#pragma once

// Minimal POSIX ustar archives: regular files only, built in memory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ptseg {

struct TarEntry {
  std::string path;
  std::vector<std::uint8_t> data;
};

/// Paths must be relative, '/'-separated and fit ustar's 100+155 split.
std::vector<std::uint8_t> write_tar(const std::vector<TarEntry>& entries);
/// Reads regular files; other entry types are skipped. Throws invalid_input
/// on bad checksums or truncation.
std::vector<TarEntry> read_tar(const std::vector<std::uint8_t>& archive);
/// Writes each entry under `root`, creating directories. Rejects paths that
/// escape `root`.
void extract_tar(const std::vector<std::uint8_t>& archive, const std::filesystem::path& root);

}  // namespace ptseg
