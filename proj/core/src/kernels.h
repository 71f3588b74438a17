#ifndef DGNET_SRC_KERNELS_H_
#define DGNET_SRC_KERNELS_H_

#include <cstdint>
#include <vector>

// Dense kernels behind the tensor ops. Row-major throughout; all dot products
// accumulate in double and round once on store.
namespace dgnet::kernels {

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate);
// C[M,N] (+)= A[M,K] * B[N,K]^T
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate);
// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
             const float* b, float* c, bool accumulate);

struct ConvGeometry {
  std::int64_t channels, height, width;  // image side
  std::int64_t kernel, stride, pad;
  std::int64_t out_height, out_width;    // column side

  std::int64_t col_rows() const { return channels * kernel * kernel; }
  std::int64_t col_cols() const { return out_height * out_width; }
};

// col[(c,ky,kx), (oy,ox)] = img[c, oy*s-p+ky, ox*s-p+kx] (zero outside).
void im2col(const ConvGeometry& g, const float* img, float* col);
// img[c, y, x] += sum of col entries that im2col would read from (c, y, x).
void col2im(const ConvGeometry& g, const float* col, float* img);

}  // namespace dgnet::kernels

#endif  // DGNET_SRC_KERNELS_H_
