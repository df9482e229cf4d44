#include "ptseg/image_io.hpp"

#include <png.h>
#include <jpeglib.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "ptseg/error.hpp"

namespace ptseg {

const std::array<Rgb, 256>& davis_palette() {
  static const std::array<Rgb, 256> palette = [] {
    std::array<Rgb, 256> p{};
    for (int i = 0; i < 256; ++i) {
      int c = i;
      int r = 0, g = 0, b = 0;
      for (int j = 0; j < 8; ++j) {
        r |= ((c >> 0) & 1) << (7 - j);
        g |= ((c >> 1) & 1) << (7 - j);
        b |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
      }
      p[i] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
              static_cast<std::uint8_t>(b)};
    }
    return p;
  }();
  return palette;
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::not_found, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::invalid_input, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::invalid_input, "failed writing " + path);
}

bool is_png(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  const std::vector<std::uint8_t>* bytes = nullptr;
  std::size_t cursor = 0;
  std::string error;

  ~PngReader() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
  if (r->cursor + n > r->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, r->bytes->data() + r->cursor, n);
  r->cursor += n;
}

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err != nullptr) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // indices or RGB
};

// Decodes a PNG, either keeping palette indices (`indexed`) or converting to RGB.
Decoded decode_png(const std::vector<std::uint8_t>& bytes, bool indexed, ErrorKind bad_kind,
                   const std::string& what) {
  require(is_png(bytes), bad_kind, what + " is not a PNG file");
  PngReader r;
  r.bytes = &bytes;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &r.error, png_error_cb, png_warning_cb);
  require(r.png != nullptr, ErrorKind::invalid_input, "libpng initialization failed");
  r.info = png_create_info_struct(r.png);
  Decoded out;
  std::vector<png_bytep> rows;
  bool wrong_type = false;
  if (setjmp(png_jmpbuf(r.png))) {
    fail(bad_kind, what + ": " + (r.error.empty() ? "corrupt PNG" : r.error));
  }
  png_set_read_fn(r.png, &r, png_read_cb);
  png_read_info(r.png, r.info);
  const auto color = png_get_color_type(r.png, r.info);
  const auto depth = png_get_bit_depth(r.png, r.info);
  out.width = static_cast<int>(png_get_image_width(r.png, r.info));
  out.height = static_cast<int>(png_get_image_height(r.png, r.info));
  if (indexed) {
    if (color != PNG_COLOR_TYPE_PALETTE) {
      wrong_type = true;
    } else if (depth < 8) {
      png_set_packing(r.png);
    }
  } else {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (depth == 16) png_set_strip_16(r.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(r.png);
    }
    png_set_strip_alpha(r.png);
  }
  if (!wrong_type) {
    png_read_update_info(r.png, r.info);
    const std::size_t stride = png_get_rowbytes(r.png, r.info);
    const std::size_t channels = indexed ? 1 : 3;
    if (stride != static_cast<std::size_t>(out.width) * channels) {
      png_error(r.png, "unexpected row layout");
    }
    out.data.resize(stride * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + stride * y;
    png_read_image(r.png, rows.data());
  }
  require(!wrong_type, ErrorKind::invalid_dataset,
          what + " is not an indexed (palette) PNG");
  return out;
}

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::vector<std::uint8_t> out;
  std::string error;

  ~PngWriter() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* w = static_cast<PngWriter*>(png_get_io_ptr(png));
  w->out.insert(w->out.end(), data, data + n);
}

void png_flush_cb(png_structp) {}

std::vector<std::uint8_t> encode(int width, int height, const std::uint8_t* data, bool indexed) {
  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &w.error, png_error_cb, png_warning_cb);
  require(w.png != nullptr, ErrorKind::invalid_input, "libpng initialization failed");
  w.info = png_create_info_struct(w.png);
  const std::size_t stride = static_cast<std::size_t>(width) * (indexed ? 1 : 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  std::array<png_color, 256> colors{};
  if (setjmp(png_jmpbuf(w.png))) fail(ErrorKind::invalid_input, "PNG encoding failed: " + w.error);
  png_set_write_fn(w.png, &w, png_write_cb, png_flush_cb);
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               indexed ? PNG_COLOR_TYPE_PALETTE : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (indexed) {
    const auto& p = davis_palette();
    for (int i = 0; i < 256; ++i) colors[i] = {p[i].r, p[i].g, p[i].b};
    png_set_PLTE(w.png, w.info, colors.data(), 256);
  }
  png_write_info(w.png, w.info);
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(data + stride * y);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
  return std::move(w.out);
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Frame decode_jpeg(const std::vector<std::uint8_t>& bytes, int index, const std::string& what) {
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> rgb;
  int width = 0;
  int height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorKind::invalid_dataset, what + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Frame(index, width, height, std::move(rgb));
}

Frame decode_any(const std::vector<std::uint8_t>& bytes, int index, const std::string& path) {
  if (is_png(bytes)) {
    auto d = decode_png(bytes, false, ErrorKind::invalid_dataset, path);
    return Frame(index, d.width, d.height, std::move(d.data));
  }
  require(bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8, ErrorKind::invalid_dataset,
          path + " is neither PNG nor JPEG");
  return decode_jpeg(bytes, index, path);
}

}  // namespace

LabelMap decode_indexed_png(const std::vector<std::uint8_t>& bytes) {
  auto d = decode_png(bytes, true, ErrorKind::invalid_dataset, "annotation");
  return LabelMap(d.width, d.height, std::move(d.data));
}

LabelMap read_indexed_png(const std::string& path) {
  auto d = decode_png(read_file(path), true, ErrorKind::invalid_dataset, path);
  return LabelMap(d.width, d.height, std::move(d.data));
}

std::vector<std::uint8_t> encode_indexed_png(const LabelMap& labels) {
  require(labels.width() >= 1 && labels.height() >= 1, ErrorKind::invalid_input,
          "cannot encode an empty label map");
  return encode(labels.width(), labels.height(), labels.labels().data(), true);
}

void write_indexed_png(const std::string& path, const LabelMap& labels) {
  write_file(path, encode_indexed_png(labels));
}

Frame read_image(const std::string& path, int index) {
  const auto bytes = read_file(path);
  return decode_any(bytes, index, path);
}

Frame decode_image(const std::vector<std::uint8_t>& bytes, int index) {
  return decode_any(bytes, index, "image");
}


std::vector<std::uint8_t> encode_png(const Frame& frame) {
  return encode(frame.width(), frame.height(), frame.pixels().data(), false);
}

void write_png(const std::string& path, const Frame& frame) { write_file(path, encode_png(frame)); }

}  // namespace ptseg
