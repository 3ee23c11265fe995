#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace labelaug {

/// Row-major interleaved raster.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  size_t index(int x, int y, int c = 0) const {
    return (static_cast<size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool operator==(const Raster&) const = default;
};

/// 8-bit RGB image (channels == 3) or single-channel mask (channels == 1,
/// values 0 / 255).
using Image = Raster<std::uint8_t>;
using Mask = Raster<std::uint8_t>;
using GrayImage = Raster<float>;

using Rgb = std::array<double, 3>;

Image make_rgb(int width, int height, std::uint8_t fill = 0);
Mask make_mask(int width, int height);

/// Expands grey or RGBA to RGB; RGB passes through.
Image to_rgb(const Image& img);

/// ITU-R BT.601 luma, unrounded.
GrayImage to_gray(const Image& img);

/// Bilinear read with pixel centres at integer coordinates. Samples
/// outside the image clamp to the border.
Rgb sample_bilinear(const Image& img, double x, double y);

Image resize_bilinear(const Image& img, int width, int height);
/// Box-filter downscale (falls back to bilinear when upscaling).
Image resize_area(const Image& img, int width, int height);
Mask resize_mask(const Mask& mask, int width, int height);

Image flip_vertical(const Image& img);
Mask erode(const Mask& mask, int radius);

std::uint8_t clamp_u8(double v);

/// Mean absolute difference in [0, 1] units over pixels where `where` is set.
double mean_abs_diff(const Image& a, const Image& b, const Mask& where);
/// PSNR in dB (peak 255) over pixels where `where` is set.
double psnr(const Image& a, const Image& b, const Mask& where);
size_t count_set(const Mask& mask);

}  // namespace labelaug
