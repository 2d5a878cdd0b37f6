#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "nvc/errors.hpp"
#include "nvc/tensor.hpp"

namespace nvc {

/// 8-bit RGB image, row-major interleaved.
struct ImageU8 {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  bool operator==(const ImageU8&) const = default;
};

// ---- PPM (binary P6, maxval 255) ----------------------------------------------

inline ImageU8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open image file: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw format_error(path + ": not a binary PPM (P6) file");
  auto next_int = [&]() -> std::int64_t {
    // Skip whitespace and '#' comment lines between header fields.
    int ch = f.get();
    while (ch == '#' || std::isspace(ch)) {
      if (ch == '#')
        while (ch != '\n' && ch != EOF) ch = f.get();
      ch = f.get();
    }
    std::int64_t v = 0;
    bool any = false;
    while (ch >= '0' && ch <= '9') {
      v = v * 10 + (ch - '0');
      any = true;
      ch = f.get();
    }
    if (!any) throw format_error(path + ": malformed PPM header");
    f.unget();
    return v;
  };
  ImageU8 img;
  img.width = next_int();
  img.height = next_int();
  const std::int64_t maxval = next_int();
  if (img.width < 1 || img.height < 1) throw format_error(path + ": bad PPM extents");
  if (maxval != 255) throw format_error(path + ": unsupported PPM maxval (need 255)");
  f.get();  // single whitespace after maxval
  img.rgb.resize(static_cast<std::size_t>(img.width * img.height * 3));
  f.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.rgb.size()))
    throw format_error(path + ": PPM pixel data truncated");
  return img;
}

inline void write_ppm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write image file: " + path);
  f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw io_error("short write: " + path);
}

// ---- PNG ------------------------------------------------------------------------

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// Reads a PNG as 8-bit RGB; grayscale, palette, 16-bit and alpha inputs are
/// normalized to RGB on the way in.
inline ImageU8 read_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw io_error("cannot open image file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("libpng: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw format_error(path + ": not a valid PNG file");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);             // palette/gray/low-bit-depth -> 8-bit
  png_set_strip_16(png);           // 16-bit -> 8-bit
  png_set_strip_alpha(png);        // drop alpha
  png_set_gray_to_rgb(png);        // gray -> RGB
  png_read_update_info(png, info);

  ImageU8 img;
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw format_error(path + ": unsupported pixel format after RGB normalization");
  }
  img.rgb.resize(static_cast<std::size_t>(img.width * img.height * 3));
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (std::int64_t y = 0; y < img.height; ++y)
    rows[static_cast<std::size_t>(y)] = img.rgb.data() + y * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::string& path, const ImageU8& img) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw io_error("cannot write image file: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng: write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (std::int64_t y = 0; y < img.height; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(img.rgb.data() + y * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- dispatch by extension -------------------------------------------------------

inline bool has_extension(const std::string& path, const char* ext) {
  auto e = std::filesystem::path(path).extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(c));
  return e == ext;
}

inline ImageU8 read_image(const std::string& path) {
  if (has_extension(path, ".ppm")) return read_ppm(path);
  if (has_extension(path, ".png")) return read_png(path);
  throw format_error(path + ": unsupported image format (need .png or .ppm)");
}

inline void write_image(const std::string& path, const ImageU8& img) {
  if (has_extension(path, ".ppm")) return write_ppm(path, img);
  if (has_extension(path, ".png")) return write_png(path, img);
  throw format_error(path + ": unsupported image format (need .png or .ppm)");
}

// ---- tensor conversion -------------------------------------------------------------

/// pixel/255 -> [0,1], planar 1 x 3 x H x W.
template <typename T = float>
Tensor<T> image_to_tensor(const ImageU8& img) {
  std::vector<T> data(static_cast<std::size_t>(3 * img.height * img.width));
  const std::int64_t hw = img.height * img.width;
  for (std::int64_t y = 0; y < img.height; ++y)
    for (std::int64_t x = 0; x < img.width; ++x)
      for (std::int64_t c = 0; c < 3; ++c)
        data[static_cast<std::size_t>(c * hw + y * img.width + x)] =
            static_cast<T>(img.rgb[static_cast<std::size_t>((y * img.width + x) * 3 + c)]) /
            T(255);
  return Tensor<T>({1, 3, img.height, img.width}, std::move(data));
}

/// round(255 * v) clamped to [0, 255]. This is the one quantization rule used
/// everywhere a reconstruction is materialized as pixels.
template <typename T>
ImageU8 tensor_to_image(const Tensor<T>& t) {
  const Shape& s = t.shape();
  if (s.size() != 4 || s[0] != 1 || s[1] != 3)
    throw shape_error("tensor_to_image: expected 1x3xHxW, got " + shape_str(s));
  ImageU8 img;
  img.height = s[2];
  img.width = s[3];
  img.rgb.resize(static_cast<std::size_t>(3 * img.height * img.width));
  const std::int64_t hw = img.height * img.width;
  for (std::int64_t y = 0; y < img.height; ++y)
    for (std::int64_t x = 0; x < img.width; ++x)
      for (std::int64_t c = 0; c < 3; ++c) {
        const double v = std::round(255.0 * static_cast<double>(t.data()[c * hw + y * img.width + x]));
        img.rgb[static_cast<std::size_t>((y * img.width + x) * 3 + c)] =
            static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
      }
  return img;
}

/// Reflect-pads an image tensor on the bottom/right to the next multiple of
/// `factor` (mirror without repeating the edge sample; falls back to edge
/// replication for single-pixel extents).
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& t, std::int64_t factor) {
  const Shape& s = t.shape();
  if (s.size() != 4) throw shape_error("pad_to_multiple: expected NCHW, got " + shape_str(s));
  const std::int64_t H = s[2], W = s[3];
  const std::int64_t Hp = (H + factor - 1) / factor * factor;
  const std::int64_t Wp = (W + factor - 1) / factor * factor;
  if (Hp == H && Wp == W) return t;
  auto reflect = [](std::int64_t i, std::int64_t n) {
    if (i < n) return i;
    const std::int64_t r = n > 1 ? 2 * n - 2 - i : 0;
    return r >= 0 ? r : (n > 1 ? i % n : 0);
  };
  std::vector<T> out(static_cast<std::size_t>(s[0] * s[1] * Hp * Wp));
  for (std::int64_t n = 0; n < s[0]; ++n)
    for (std::int64_t c = 0; c < s[1]; ++c) {
      const T* src = t.data().data() + (n * s[1] + c) * H * W;
      T* dst = out.data() + (n * s[1] + c) * Hp * Wp;
      for (std::int64_t y = 0; y < Hp; ++y) {
        const std::int64_t sy = reflect(y, H);
        for (std::int64_t x = 0; x < Wp; ++x) dst[y * Wp + x] = src[sy * W + reflect(x, W)];
      }
    }
  return Tensor<T>({s[0], s[1], Hp, Wp}, std::move(out));
}

/// Crops the top-left H x W window (inverse of pad_to_multiple).
template <typename T>
Tensor<T> crop(const Tensor<T>& t, std::int64_t H, std::int64_t W) {
  const Shape& s = t.shape();
  if (s.size() != 4 || s[2] < H || s[3] < W)
    throw shape_error("crop: cannot take " + std::to_string(H) + "x" + std::to_string(W) +
                      " from " + shape_str(s));
  if (s[2] == H && s[3] == W) return t;
  std::vector<T> out(static_cast<std::size_t>(s[0] * s[1] * H * W));
  for (std::int64_t n = 0; n < s[0]; ++n)
    for (std::int64_t c = 0; c < s[1]; ++c)
      for (std::int64_t y = 0; y < H; ++y)
        std::copy_n(t.data().begin() + ((n * s[1] + c) * s[2] + y) * s[3], W,
                    out.begin() + ((n * s[1] + c) * H + y) * W);
  return Tensor<T>({s[0], s[1], H, W}, std::move(out));
}

}  // namespace nvc
