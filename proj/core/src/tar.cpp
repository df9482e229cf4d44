#include "ptseg/tar.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "ptseg/error.hpp"

namespace ptseg {

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(std::uint8_t* field, std::size_t width, std::uint64_t value) {
  // width-1 digits then NUL
  for (std::size_t i = width - 1; i-- > 0;) {
    field[i] = static_cast<std::uint8_t>('0' + (value & 7));
    value >>= 3;
  }
  require(value == 0, ErrorKind::invalid_input, "value too large for a tar header field");
  field[width - 1] = 0;
}

std::uint64_t get_octal(const std::uint8_t* field, std::size_t width) {
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < width && (field[i] == ' ' || field[i] == 0)) {
    if (field[i] == 0) return 0;
    ++i;
  }
  for (; i < width && field[i] >= '0' && field[i] <= '7'; ++i) v = (v << 3) | (field[i] - '0');
  return v;
}

std::string get_string(const std::uint8_t* field, std::size_t width) {
  const auto* end = std::find(field, field + width, std::uint8_t{0});
  return {reinterpret_cast<const char*>(field), reinterpret_cast<const char*>(end)};
}

std::uint32_t checksum(const std::uint8_t* header) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    sum += (i >= 148 && i < 156) ? static_cast<std::uint8_t>(' ') : header[i];
  }
  return sum;
}

void split_path(const std::string& path, std::string& prefix, std::string& name) {
  require(!path.empty() && path.front() != '/', ErrorKind::invalid_input,
          "tar paths must be relative: '" + path + "'");
  if (path.size() <= 100) {
    prefix.clear();
    name = path;
    return;
  }
  for (std::size_t cut = path.find('/'); cut != std::string::npos; cut = path.find('/', cut + 1)) {
    if (cut <= 155 && path.size() - cut - 1 <= 100) {
      prefix = path.substr(0, cut);
      name = path.substr(cut + 1);
      return;
    }
  }
  fail(ErrorKind::invalid_input, "path too long for ustar: '" + path + "'");
}

}  // namespace

std::vector<std::uint8_t> write_tar(const std::vector<TarEntry>& entries) {
  std::vector<std::uint8_t> out;
  for (const auto& e : entries) {
    std::string prefix;
    std::string name;
    split_path(e.path, prefix, name);
    std::uint8_t h[kBlock] = {};
    std::memcpy(h, name.data(), name.size());
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, e.data.size());
    put_octal(h + 136, 12, 0);
    h[156] = '0';
    std::memcpy(h + 257, "ustar", 6);
    h[263] = '0';
    h[264] = '0';
    std::memcpy(h + 345, prefix.data(), prefix.size());
    const auto sum = checksum(h);
    put_octal(h + 148, 7, sum);
    h[155] = ' ';
    out.insert(out.end(), h, h + kBlock);
    out.insert(out.end(), e.data.begin(), e.data.end());
    out.resize(out.size() + (kBlock - e.data.size() % kBlock) % kBlock, 0);
  }
  out.resize(out.size() + 2 * kBlock, 0);
  return out;
}

std::vector<TarEntry> read_tar(const std::vector<std::uint8_t>& archive) {
  std::vector<TarEntry> out;
  std::size_t pos = 0;
  while (pos + kBlock <= archive.size()) {
    const auto* h = archive.data() + pos;
    if (std::all_of(h, h + kBlock, [](std::uint8_t b) { return b == 0; })) return out;
    require(get_octal(h + 148, 8) == checksum(h), ErrorKind::invalid_input,
            "tar header checksum mismatch");
    const auto size = get_octal(h + 124, 12);
    pos += kBlock;
    require(size <= archive.size() - pos, ErrorKind::invalid_input, "truncated tar entry");
    const char type = static_cast<char>(h[156]);
    if (type == '0' || type == 0) {
      std::string path = get_string(h, 100);
      const std::string prefix = get_string(h + 345, 155);
      if (!prefix.empty()) path = prefix + "/" + path;
      out.push_back({path, {archive.begin() + static_cast<std::ptrdiff_t>(pos),
                            archive.begin() + static_cast<std::ptrdiff_t>(pos + size)}});
    }
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  fail(ErrorKind::invalid_input, "tar archive lacks its end marker");
}

void extract_tar(const std::vector<std::uint8_t>& archive, const std::filesystem::path& root) {
  for (const auto& e : read_tar(archive)) {
    const std::filesystem::path rel(e.path);
    require(rel.is_relative(), ErrorKind::invalid_input, "absolute path in archive");
    for (const auto& part : rel) {
      require(part != "..", ErrorKind::invalid_input, "path escapes the output directory");
    }
    const auto target = root / rel;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary);
    require(out.good(), ErrorKind::invalid_input, "cannot write " + target.string());
    out.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(e.data.size()));
  }
}

}  // namespace ptseg
