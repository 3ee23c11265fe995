#include "labelaug/image.hpp"

#include "labelaug/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace labelaug {

Image make_rgb(int width, int height, std::uint8_t fill) { return Image(width, height, 3, fill); }

Mask make_mask(int width, int height) { return Mask(width, height, 1, 0); }

Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1 && img.channels != 4 && img.channels != 2) {
    fail(ErrorCode::InvalidArgument, "unsupported channel count");
  }
  Image out = make_rgb(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = img.channels >= 3 ? img.at(x, y, c) : img.at(x, y, 0);
      }
    }
  }
  return out;
}

GrayImage to_gray(const Image& img) {
  GrayImage g(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 1) {
        g.at(x, y) = img.at(x, y);
      } else {
        g.at(x, y) = static_cast<float>(0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                                        0.114 * img.at(x, y, 2));
      }
    }
  }
  return g;
}

Rgb sample_bilinear(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = std::min(static_cast<int>(x), img.width - 1);
  const int y0 = std::min(static_cast<int>(y), img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0, fy = y - y0;
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    const int ch = img.channels == 1 ? 0 : c;
    const double top = (1.0 - fx) * img.at(x0, y0, ch) + fx * img.at(x1, y0, ch);
    const double bot = (1.0 - fx) * img.at(x0, y1, ch) + fx * img.at(x1, y1, ch);
    out[c] = (1.0 - fy) * top + fy * bot;
  }
  return out;
}

std::uint8_t clamp_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "resize to empty size");
  const Image src = to_rgb(img);
  Image out = make_rgb(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Rgb c = sample_bilinear(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
      for (int k = 0; k < 3; ++k) out.at(x, y, k) = clamp_u8(c[k]);
    }
  }
  return out;
}

namespace {

// Box-filter resampling of a channel-generic raster into doubles.
std::vector<double> box_resample(const Image& src, int width, int height) {
  const int ch = src.channels;
  std::vector<double> acc(static_cast<size_t>(width) * height * ch, 0.0);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double y0 = y * sy, y1 = (y + 1) * sy;
    for (int x = 0; x < width; ++x) {
      const double x0 = x * sx, x1 = (x + 1) * sx;
      double weight = 0.0;
      double* dst = &acc[(static_cast<size_t>(y) * width + x) * ch];
      for (int iy = static_cast<int>(y0); iy < std::min(src.height, static_cast<int>(std::ceil(y1))); ++iy) {
        const double wy = std::min(y1, iy + 1.0) - std::max(y0, static_cast<double>(iy));
        if (wy <= 0.0) continue;
        for (int ix = static_cast<int>(x0); ix < std::min(src.width, static_cast<int>(std::ceil(x1))); ++ix) {
          const double wx = std::min(x1, ix + 1.0) - std::max(x0, static_cast<double>(ix));
          if (wx <= 0.0) continue;
          const double w = wx * wy;
          weight += w;
          for (int c = 0; c < ch; ++c) dst[c] += w * src.at(ix, iy, c);
        }
      }
      for (int c = 0; c < ch; ++c) dst[c] /= weight;
    }
  }
  return acc;
}

}  // namespace

Image resize_area(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "resize to empty size");
  if (width > img.width || height > img.height) return resize_bilinear(img, width, height);
  const Image src = to_rgb(img);
  const std::vector<double> acc = box_resample(src, width, height);
  Image out = make_rgb(width, height);
  for (size_t i = 0; i < acc.size(); ++i) out.data[i] = clamp_u8(acc[i]);
  return out;
}

Mask resize_mask(const Mask& mask, int width, int height) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "resize to empty size");
  Mask out = make_mask(width, height);
  if (width <= mask.width && height <= mask.height) {
    // Any coverage marks the output pixel.
    const std::vector<double> acc = box_resample(mask, width, height);
    for (size_t i = 0; i < acc.size(); ++i) out.data[i] = acc[i] > 0.0 ? 255 : 0;
    return out;
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / width));
      const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / height));
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) out.at(x, img.height - 1 - y, c) = img.at(x, y, c);
    }
  }
  return out;
}

Mask erode(const Mask& mask, int radius) {
  Mask out = make_mask(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool keep = mask.at(x, y) != 0;
      for (int dy = -radius; keep && dy <= radius; ++dy) {
        for (int dx = -radius; keep && dx <= radius; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (!mask.contains(xx, yy) || mask.at(xx, yy) == 0) keep = false;
        }
      }
      out.at(x, y) = keep ? 255 : 0;
    }
  }
  return out;
}

double mean_abs_diff(const Image& a, const Image& b, const Mask& where) {
  double sum = 0.0;
  size_t n = 0;
  for (int y = 0; y < where.height; ++y) {
    for (int x = 0; x < where.width; ++x) {
      if (!where.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(double(a.at(x, y, c)) - double(b.at(x, y, c)));
      n += 3;
    }
  }
  return n ? sum / (255.0 * static_cast<double>(n)) : 0.0;
}

double psnr(const Image& a, const Image& b, const Mask& where) {
  double sum = 0.0;
  size_t n = 0;
  for (int y = 0; y < where.height; ++y) {
    for (int x = 0; x < where.width; ++x) {
      if (!where.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        sum += d * d;
      }
      n += 3;
    }
  }
  if (n == 0) return 0.0;
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

size_t count_set(const Mask& mask) {
  return static_cast<size_t>(std::count_if(mask.data.begin(), mask.data.end(), [](auto v) { return v != 0; }));
}

}  // namespace labelaug
