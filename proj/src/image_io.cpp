#include "cogo/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "cogo/error.hpp"

namespace cogo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, int color_type,
               const std::vector<png_byte>& pixels, std::size_t channels) {
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: identical pixels give identical bytes.
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

png_byte to_byte(float v) {
  const float q = quantize8(v);
  return static_cast<png_byte>(static_cast<int>(q * 255.0f + 0.5f));
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const Array& image) {
  if (image.shape.size() != 3 || image.shape[0] != 3)
    throw ShapeError("write_png_rgb: expected (3,H,W), got " + shape_str(image.shape));
  const std::size_t h = image.shape[1], w = image.shape[2];
  std::vector<png_byte> px(h * w * 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) px[i * 3 + c] = to_byte(image[c * h * w + i]);
  write_png(path, w, h, PNG_COLOR_TYPE_RGB, px, 3);
}

void write_png_gray(const std::filesystem::path& path, const Array& map) {
  if (map.shape.size() != 2) throw ShapeError("write_png_gray: expected (H,W), got " + shape_str(map.shape));
  const std::size_t h = map.shape[0], w = map.shape[1];
  std::vector<png_byte> px(h * w);
  for (std::size_t i = 0; i < h * w; ++i) px[i] = to_byte(map[i]);
  write_png(path, w, h, PNG_COLOR_TYPE_GRAY, px, 1);
}

Array read_png(const std::filesystem::path& path) {
  File f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != w * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG layout in " + path.string());
  }
  std::vector<png_byte> px(h * rowbytes);
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = px.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Array out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) out[c * h * w + i] = static_cast<float>(px[i * 3 + c]) / 255.0f;
  return out;
}

}  // namespace cogo
