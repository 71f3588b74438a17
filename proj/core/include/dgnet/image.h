#ifndef DGNET_IMAGE_H_
#define DGNET_IMAGE_H_

#include <cstdint>
#include <vector>

namespace dgnet {

// Row-major single-channel float image. Masks use the same type with
// values in {0, 1} (1 = oil).
struct Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::int64_t h, std::int64_t w, float fill = 0.0f);

  std::int64_t size() const { return height * width; }
  bool empty() const { return pixels.empty(); }
  float& at(std::int64_t y, std::int64_t x) { return pixels[y * width + x]; }
  float at(std::int64_t y, std::int64_t x) const { return pixels[y * width + x]; }

  bool operator==(const Image&) const = default;
};

bool is_binary(const Image& mask);

// Bilinear resampling with pixel-centre alignment.
Image resize_bilinear(const Image& src, std::int64_t height, std::int64_t width);
// Nearest-neighbour resampling with pixel-centre alignment.
Image resize_nearest(const Image& src, std::int64_t height, std::int64_t width);

// 1 where value >= threshold, else 0.
Image threshold(const Image& src, float level);

}  // namespace dgnet

#endif  // DGNET_IMAGE_H_
