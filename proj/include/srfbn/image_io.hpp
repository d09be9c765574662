#pragma once

// 8-bit PNG <-> Tensor4 in [0, 1], via libpng's simplified API.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "srfbn/error.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

inline std::uint8_t quantize8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

/// 3 for colour PNGs, 1 for grayscale; alpha is not counted.
inline int png_channels(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  const int c = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  png_image_free(&image);
  return c;
}

/// Reads a PNG as a 1 x channels x h x w tensor; channels is 1 (gray) or 3 (RGB).
inline Tensor4 read_png(const std::filesystem::path& path, int channels = 3) {
  detail::require<ConfigError>(channels == 1 || channels == 3, "read_png: channels must be 1 or 3");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  Tensor4 t(1, channels, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        t(0, c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0f;
  return t;
}

/// Writes sample 0 of a 1- or 3-channel tensor, rounding to 8 bits.
inline void write_png(const std::filesystem::path& path, const Tensor4& img) {
  detail::require<ShapeError>(img.n() >= 1 && (img.c() == 1 || img.c() == 3),
                              "write_png: expected 1 or 3 channels, got " + img.dims().str());
  const int h = img.h(), w = img.w(), channels = img.c();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        buf[(static_cast<std::size_t>(y) * w + x) * channels + c] = quantize8(img(0, c, y, x));
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
}

/// Rounds every value to the nearest 8-bit level, as a PNG round-trip would.
inline Tensor4 quantize_to_8bit(const Tensor4& img) {
  Tensor4 out(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = quantize8(img[i]) / 255.0f;
  return out;
}

struct NamedImage {
  std::string name;
  Tensor4 image;
};

/// All *.png files of a directory in name order.
inline std::vector<NamedImage> read_png_dir(const std::filesystem::path& dir, int channels = 3) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> out;
  for (const auto& f : files) out.push_back({f.stem().string(), read_png(f, channels)});
  return out;
}

/// Crops the bottom/right edges so both extents are multiples of `scale`.
inline Tensor4 modcrop(const Tensor4& img, int scale) {
  const int h = img.h() - img.h() % scale;
  const int w = img.w() - img.w() % scale;
  Tensor4 out(Dims4{img.n(), img.c(), h, w});
  for (int b = 0; b < img.n(); ++b)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(b, c, y, x) = img(b, c, y, x);
  return out;
}

/// Spatial crop [y, y + h) x [x, x + w).
inline Tensor4 crop(const Tensor4& img, int y0, int x0, int h, int w) {
  detail::require<ShapeError>(y0 >= 0 && x0 >= 0 && y0 + h <= img.h() && x0 + w <= img.w(),
                              "crop window out of bounds");
  Tensor4 out(Dims4{img.n(), img.c(), h, w});
  for (int b = 0; b < img.n(); ++b)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < h; ++y)
        std::copy_n(img.plane(b, c) + static_cast<std::size_t>(y0 + y) * img.w() + x0, w,
                    out.plane(b, c) + static_cast<std::size_t>(y) * w);
  return out;
}

}  // namespace srfbn
