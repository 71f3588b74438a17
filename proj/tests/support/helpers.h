#ifndef DGNET_TESTS_SUPPORT_HELPERS_H_
#define DGNET_TESTS_SUPPORT_HELPERS_H_

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dgnet/rng.h"
#include "dgnet/tensor.h"

namespace dgnet::testing {

inline std::vector<float> uniform_values(std::int64_t n, Rng& rng, float lo = -1.0f,
                                         float hi = 1.0f) {
  std::vector<float> v(static_cast<std::size_t>(n));
  for (float& x : v) x = lo + (hi - lo) * rng.uniform_float();
  return v;
}

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false,
                            float lo = -1.0f, float hi = 1.0f) {
  const std::int64_t n = shape_numel(shape);
  return Tensor::from_data(std::move(shape), uniform_values(n, rng, lo, hi), requires_grad);
}

inline std::vector<double> to_double(std::span<const float> v) {
  return {v.begin(), v.end()};
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dgnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dgnet::testing

#endif  // DGNET_TESTS_SUPPORT_HELPERS_H_
