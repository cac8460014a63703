#include "retscreen/imaging/codec.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "retscreen/error.hpp"

namespace retscreen::imaging {

namespace {

std::uint8_t quantize(float v) {
  const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

PixelGrid grid_from_bytes(int width, int height, int channels, const std::vector<std::uint8_t>& raw) {
  std::vector<float> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) values[i] = static_cast<float>(raw[i]) / 255.0f;
  return PixelGrid(width, height, channels, std::move(values));
}

PixelGrid decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(Errc::kDecodeError, std::string("png: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::kDecodeError, "png: " + msg);
  }
  return grid_from_bytes(static_cast<int>(image.width), static_cast<int>(image.height), channels, raw);
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Warnings (premature EOF, corrupt data) are fatal for clinical input.
void jpeg_emit_message(j_common_ptr cinfo, int level) {
  if (level < 0) jpeg_error_exit(cinfo);
}

// State lives behind a reference so nothing local to the setjmp frame is
// modified between setjmp and longjmp.
struct JpegDecodeState {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  std::vector<std::uint8_t> raw;
  int width = 0;
  int height = 0;
  int channels = 0;
};

bool run_jpeg_decode(std::span<const std::uint8_t> bytes, JpegDecodeState& st) {
  st.cinfo.err = jpeg_std_error(&st.err.base);
  st.err.base.error_exit = jpeg_error_exit;
  st.err.base.emit_message = jpeg_emit_message;
  st.err.message[0] = '\0';
  if (setjmp(st.err.jump)) {
    jpeg_destroy_decompress(&st.cinfo);
    return false;
  }
  jpeg_create_decompress(&st.cinfo);
  jpeg_mem_src(&st.cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&st.cinfo, TRUE);
  st.cinfo.out_color_space = st.cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&st.cinfo);
  st.width = static_cast<int>(st.cinfo.output_width);
  st.height = static_cast<int>(st.cinfo.output_height);
  st.channels = st.cinfo.output_components;
  st.raw.resize(static_cast<std::size_t>(st.width) * static_cast<std::size_t>(st.height) *
                static_cast<std::size_t>(st.channels));
  const std::size_t stride = static_cast<std::size_t>(st.width) * static_cast<std::size_t>(st.channels);
  while (st.cinfo.output_scanline < st.cinfo.output_height) {
    JSAMPROW row = st.raw.data() + static_cast<std::size_t>(st.cinfo.output_scanline) * stride;
    jpeg_read_scanlines(&st.cinfo, &row, 1);
  }
  jpeg_finish_decompress(&st.cinfo);
  jpeg_destroy_decompress(&st.cinfo);
  return true;
}

PixelGrid decode_jpeg(std::span<const std::uint8_t> bytes) {
  JpegDecodeState st;
  if (!run_jpeg_decode(bytes, st)) {
    throw Error(Errc::kDecodeError, std::string("jpeg: ") + st.err.message);
  }
  return grid_from_bytes(st.width, st.height, st.channels, st.raw);
}

struct JpegEncodeState {
  jpeg_compress_struct cinfo;
  JpegErrorManager err;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
};

bool run_jpeg_encode(const PixelGrid& grid, const std::vector<std::uint8_t>& raw, int quality,
                     JpegEncodeState& st) {
  st.cinfo.err = jpeg_std_error(&st.err.base);
  st.err.base.error_exit = jpeg_error_exit;
  st.err.message[0] = '\0';
  if (setjmp(st.err.jump)) {
    jpeg_destroy_compress(&st.cinfo);
    return false;
  }
  jpeg_create_compress(&st.cinfo);
  jpeg_mem_dest(&st.cinfo, &st.buffer, &st.size);
  st.cinfo.image_width = static_cast<JDIMENSION>(grid.width());
  st.cinfo.image_height = static_cast<JDIMENSION>(grid.height());
  st.cinfo.input_components = grid.channels();
  st.cinfo.in_color_space = grid.channels() == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&st.cinfo);
  jpeg_set_quality(&st.cinfo, quality, TRUE);
  jpeg_start_compress(&st.cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(grid.width()) * static_cast<std::size_t>(grid.channels());
  while (st.cinfo.next_scanline < st.cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(raw.data() + static_cast<std::size_t>(st.cinfo.next_scanline) * stride);
    jpeg_write_scanlines(&st.cinfo, &row, 1);
  }
  jpeg_finish_compress(&st.cinfo);
  jpeg_destroy_compress(&st.cinfo);
  return true;
}

struct PngWriteState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  Bytes out;
  std::string error;
};

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out.insert(st->out.end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_fail(png_structp png, png_const_charp message) {
  auto* st = static_cast<PngWriteState*>(png_get_error_ptr(png));
  st->error = message;
  png_longjmp(png, 1);
}

void png_warn_ignore(png_structp, png_const_charp) {}

bool run_png_write(int width, int height, bool color, const std::vector<std::uint8_t>& raw, PngWriteState& st) {
  st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, png_fail, png_warn_ignore);
  if (st.png == nullptr) {
    st.error = "out of memory";
    return false;
  }
  st.info = png_create_info_struct(st.png);
  if (st.info == nullptr || setjmp(png_jmpbuf(st.png))) {
    png_destroy_write_struct(&st.png, &st.info);
    return false;
  }
  png_set_write_fn(st.png, &st, png_append, png_flush_noop);
  // Fixed settings keep output byte-stable for a given zlib.
  png_set_compression_level(st.png, 3);
  png_set_filter(st.png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_set_IHDR(st.png, st.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE,
               PNG_FILTER_TYPE_BASE);
  png_write_info(st.png, st.info);
  const std::size_t stride = static_cast<std::size_t>(width) * (color ? 3u : 1u);
  for (int y = 0; y < height; ++y) {
    png_write_row(st.png, raw.data() + static_cast<std::size_t>(y) * stride);
  }
  png_write_end(st.png, nullptr);
  png_destroy_write_struct(&st.png, &st.info);
  return true;
}

Bytes write_png(int width, int height, bool color, const std::vector<std::uint8_t>& raw) {
  PngWriteState st;
  st.out.reserve(raw.size() / 2 + 1024);
  if (!run_png_write(width, height, color, raw, st)) throw Error(Errc::kIoError, "png encode: " + st.error);
  return std::move(st.out);
}

}  // namespace

PixelGrid decode(std::span<const std::uint8_t> bytes, ImageFormat format) {
  if (bytes.empty()) throw Error(Errc::kDecodeError, "empty image payload");
  return format == ImageFormat::kPng ? decode_png(bytes) : decode_jpeg(bytes);
}

std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPngMagic, 4) == 0) return ImageFormat::kPng;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::kJpeg;
  return std::nullopt;
}

PixelGrid decode(std::span<const std::uint8_t> bytes) {
  const auto format = sniff_format(bytes);
  if (!format) throw Error(Errc::kDecodeError, "unrecognized image format");
  return decode(bytes, *format);
}

Bytes encode_png(const PixelGrid& grid) {
  std::vector<std::uint8_t> raw(grid.values().size());
  const auto values = grid.values();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(values[i]);
  return write_png(grid.width(), grid.height(), grid.channels() == 3, raw);
}

Bytes encode_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> raw(mask.size());
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = bits[i] ? 255 : 0;
  return write_png(mask.width(), mask.height(), false, raw);
}

Bytes encode_jpeg(const PixelGrid& grid, int quality) {
  std::vector<std::uint8_t> raw(grid.values().size());
  const auto values = grid.values();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(values[i]);
  JpegEncodeState st;
  const bool ok = run_jpeg_encode(grid, raw, quality, st);
  Bytes out;
  if (ok) out.assign(st.buffer, st.buffer + st.size);
  std::free(st.buffer);
  if (!ok) throw Error(Errc::kIoError, std::string("jpeg encode: ") + st.err.message);
  return out;
}

BinaryMask mask_from_grid(const PixelGrid& grid) {
  BinaryMask mask(grid.width(), grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) mask.set(x, y, grid.at(x, y, 0) > 0.0f);
  }
  return mask;
}

}  // namespace retscreen::imaging
