#include "dgnet/image.h"

#include <algorithm>
#include <cmath>

#include "dgnet/error.h"

namespace dgnet {

Image::Image(std::int64_t h, std::int64_t w, float fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h * w), fill) {
  if (h < 0 || w < 0) throw ValidationError("image dimensions must be non-negative");
}

bool is_binary(const Image& mask) {
  return std::all_of(mask.pixels.begin(), mask.pixels.end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

namespace {

void require_resizable(const Image& src, std::int64_t h, std::int64_t w) {
  if (src.empty()) throw ValidationError("cannot resample an empty image");
  if (h <= 0 || w <= 0) throw ValidationError("target size must be positive");
}

}  // namespace

Image resize_bilinear(const Image& src, std::int64_t height, std::int64_t width) {
  require_resizable(src, height, width);
  if (src.height == height && src.width == width) return src;
  Image out(height, width);
  const double sy = static_cast<double>(src.height) / height;
  const double sx = static_cast<double>(src.width) / width;
  for (std::int64_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(src.height - 1));
    const auto y0 = static_cast<std::int64_t>(fy);
    const std::int64_t y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (std::int64_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(src.width - 1));
      const auto x0 = static_cast<std::int64_t>(fx);
      const std::int64_t x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const double top = src.at(y0, x0) * (1 - wx) + src.at(y0, x1) * wx;
      const double bottom = src.at(y1, x0) * (1 - wx) + src.at(y1, x1) * wx;
      out.at(y, x) = static_cast<float>(top * (1 - wy) + bottom * wy);
    }
  }
  return out;
}

Image resize_nearest(const Image& src, std::int64_t height, std::int64_t width) {
  require_resizable(src, height, width);
  if (src.height == height && src.width == width) return src;
  Image out(height, width);
  for (std::int64_t y = 0; y < height; ++y) {
    const auto sy = std::min<std::int64_t>(
        static_cast<std::int64_t>((y + 0.5) * src.height / height), src.height - 1);
    for (std::int64_t x = 0; x < width; ++x) {
      const auto sx = std::min<std::int64_t>(
          static_cast<std::int64_t>((x + 0.5) * src.width / width), src.width - 1);
      out.at(y, x) = src.at(sy, sx);
    }
  }
  return out;
}

Image threshold(const Image& src, float level) {
  Image out(src.height, src.width);
  for (std::int64_t i = 0; i < src.size(); ++i) {
    out.pixels[i] = src.pixels[i] >= level ? 1.0f : 0.0f;
  }
  return out;
}

}  // namespace dgnet
