#include "kernels.h"

#include <algorithm>

namespace dgnet::kernels {

namespace {

void transpose(std::int64_t rows, std::int64_t cols, const float* src,
               float* dst) {
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

}  // namespace

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate) {
  std::vector<double> acc(n);
  for (std::int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (accumulate) {
      for (std::int64_t j = 0; j < n; ++j) acc[j] = crow[j];
    } else {
      std::fill(acc.begin(), acc.end(), 0.0);
    }
    const float* arow = a + i * k;
    double* accp = acc.data();
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const float* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) accp[j] += av * brow[j];
    }
    for (std::int64_t j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[j]);
  }
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate) {
  std::vector<float> bt(static_cast<std::size_t>(n * k));
  transpose(n, k, b, bt.data());
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate) {
  std::vector<float> at(static_cast<std::size_t>(m * k));
  transpose(k, m, a, at.data());
  gemm_nn(m, n, k, at.data(), b, c, accumulate);
}

void im2col(const ConvGeometry& g, const float* img, float* col) {
  const std::int64_t cols = g.col_cols();
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const float* plane = img + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        float* out = col + ((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (std::int64_t oy = 0; oy < g.out_height; ++oy) {
          const std::int64_t y = oy * g.stride - g.pad + ky;
          float* orow = out + oy * g.out_width;
          if (y < 0 || y >= g.height) {
            std::fill(orow, orow + g.out_width, 0.0f);
            continue;
          }
          const float* irow = plane + y * g.width;
          for (std::int64_t ox = 0; ox < g.out_width; ++ox) {
            const std::int64_t x = ox * g.stride - g.pad + kx;
            orow[ox] = (x >= 0 && x < g.width) ? irow[x] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const float* col, float* img) {
  const std::int64_t cols = g.col_cols();
  const std::int64_t plane_size = g.height * g.width;
  std::vector<double> acc(static_cast<std::size_t>(plane_size));
  for (std::int64_t c = 0; c < g.channels; ++c) {
    float* plane = img + c * plane_size;
    for (std::int64_t i = 0; i < plane_size; ++i) acc[i] = plane[i];
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        const float* in = col + ((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (std::int64_t oy = 0; oy < g.out_height; ++oy) {
          const std::int64_t y = oy * g.stride - g.pad + ky;
          if (y < 0 || y >= g.height) continue;
          double* arow = acc.data() + y * g.width;
          const float* irow = in + oy * g.out_width;
          for (std::int64_t ox = 0; ox < g.out_width; ++ox) {
            const std::int64_t x = ox * g.stride - g.pad + kx;
            if (x >= 0 && x < g.width) arow[x] += irow[ox];
          }
        }
      }
    }
    for (std::int64_t i = 0; i < plane_size; ++i) {
      plane[i] = static_cast<float>(acc[i]);
    }
  }
}

}  // namespace dgnet::kernels
