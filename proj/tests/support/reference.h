// Naive double-precision reference implementations used as test oracles.
#ifndef DGNET_TESTS_SUPPORT_REFERENCE_H_
#define DGNET_TESTS_SUPPORT_REFERENCE_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dgnet::ref {

struct Array4 {
  std::int64_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Array4() = default;
  Array4(std::int64_t n_, std::int64_t c_, std::int64_t h_, std::int64_t w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_ * c_ * h_ * w_), 0.0) {}
  double& at(std::int64_t a, std::int64_t b, std::int64_t y, std::int64_t x) {
    return v[((a * c + b) * h + y) * w + x];
  }
  double at(std::int64_t a, std::int64_t b, std::int64_t y, std::int64_t x) const {
    return v[((a * c + b) * h + y) * w + x];
  }
};

// weight [F,C,k,k]; empty bias means none.
inline Array4 conv2d(const Array4& x, const std::vector<double>& weight, std::int64_t f,
                     std::int64_t k, const std::vector<double>& bias, int stride, int pad) {
  const std::int64_t ho = (x.h + 2 * pad - k) / stride + 1;
  const std::int64_t wo = (x.w + 2 * pad - k) / stride + 1;
  Array4 out(x.n, f, ho, wo);
  for (std::int64_t b = 0; b < x.n; ++b)
    for (std::int64_t o = 0; o < f; ++o)
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t xx = 0; xx < wo; ++xx) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::int64_t ci = 0; ci < x.c; ++ci)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const std::int64_t iy = y * stride - pad + ky;
                const std::int64_t ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += weight[((o * x.c + ci) * k + ky) * k + kx] * x.at(b, ci, iy, ix);
              }
          out.at(b, o, y, xx) = acc;
        }
  return out;
}

// weight [C,F,k,k]; every input pixel scatters a k x k patch.
inline Array4 conv2d_transpose(const Array4& x, const std::vector<double>& weight,
                               std::int64_t f, std::int64_t k,
                               const std::vector<double>& bias, int stride, int pad) {
  const std::int64_t ho = (x.h - 1) * stride - 2 * pad + k;
  const std::int64_t wo = (x.w - 1) * stride - 2 * pad + k;
  Array4 out(x.n, f, ho, wo);
  for (std::int64_t b = 0; b < x.n; ++b) {
    for (std::int64_t o = 0; o < f; ++o)
      for (std::int64_t i = 0; i < ho * wo; ++i)
        out.v[(b * f + o) * ho * wo + i] = bias.empty() ? 0.0 : bias[o];
    for (std::int64_t ci = 0; ci < x.c; ++ci)
      for (std::int64_t y = 0; y < x.h; ++y)
        for (std::int64_t xx = 0; xx < x.w; ++xx)
          for (std::int64_t o = 0; o < f; ++o)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const std::int64_t oy = y * stride - pad + ky;
                const std::int64_t ox = xx * stride - pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                out.at(b, o, oy, ox) +=
                    weight[((ci * f + o) * k + ky) * k + kx] * x.at(b, ci, y, xx);
              }
  }
  return out;
}

// Batch statistics, biased variance.
inline Array4 batchnorm_train(const Array4& x, const std::vector<double>& gamma,
                              const std::vector<double>& beta, double eps = 1e-5) {
  Array4 out = x;
  const double m = static_cast<double>(x.n * x.h * x.w);
  for (std::int64_t ci = 0; ci < x.c; ++ci) {
    double mean = 0.0;
    for (std::int64_t b = 0; b < x.n; ++b)
      for (std::int64_t i = 0; i < x.h * x.w; ++i) mean += x.v[(b * x.c + ci) * x.h * x.w + i];
    mean /= m;
    double var = 0.0;
    for (std::int64_t b = 0; b < x.n; ++b)
      for (std::int64_t i = 0; i < x.h * x.w; ++i) {
        const double d = x.v[(b * x.c + ci) * x.h * x.w + i] - mean;
        var += d * d;
      }
    var /= m;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::int64_t b = 0; b < x.n; ++b)
      for (std::int64_t i = 0; i < x.h * x.w; ++i) {
        double& v = out.v[(b * x.c + ci) * x.h * x.w + i];
        v = gamma[ci] * (v - mean) * inv + beta[ci];
      }
  }
  return out;
}

inline void leaky_relu(std::vector<double>& v, double slope) {
  for (double& x : v) x = x >= 0.0 ? x : slope * x;
}

// x [N,D] * w [D,M] + b [M]
inline std::vector<double> dense(const std::vector<double>& x, std::int64_t n, std::int64_t d,
                                 const std::vector<double>& w, const std::vector<double>& b,
                                 std::int64_t m) {
  std::vector<double> out(static_cast<std::size_t>(n * m));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      double acc = b[j];
      for (std::int64_t t = 0; t < d; ++t) acc += x[i * d + t] * w[t * m + j];
      out[i * m + j] = acc;
    }
  return out;
}

inline double bernoulli_nll(double p, double y) {
  p = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

struct ModelSpec {
  std::int64_t input_size = 16;
  std::vector<std::int64_t> channels;
  std::int64_t latent_dim = 8;
  bool gaussian = false;
  double kl_weight = 1.0;
  double slope = 0.2;
};

struct ElboValue {
  double loss = 0.0, kl = 0.0, nll = 0.0;
};

using Params = std::map<std::string, std::vector<double>>;

// Train-mode negative ELBO of the encoder/decoder stack with explicit base
// noise (uniforms for the exponential family, normals for the Gaussian one).
// Unit prior scale / rate.
inline ElboValue elbo(const ModelSpec& s, const Params& p, const Array4& images,
                      const std::vector<double>& masks, const std::vector<double>& base) {
  const std::vector<double> none;
  auto get = [&](const std::string& k) -> const std::vector<double>& {
    auto it = p.find(k);
    return it == p.end() ? none : it->second;
  };
  const std::int64_t n = images.n, d = s.latent_dim;
  Array4 x = images;
  for (int i = 0; i < 4; ++i) {
    const std::string c = "encoder.conv" + std::to_string(i), b = "encoder.bn" + std::to_string(i);
    x = conv2d(x, get(c + ".weight"), s.channels[i], 4, get(c + ".bias"), 2, 1);
    x = batchnorm_train(x, get(b + ".gamma"), get(b + ".beta"));
    leaky_relu(x.v, s.slope);
  }
  const std::int64_t flat = x.c * x.h * x.w;
  const auto h = dense(x.v, n, flat, get("encoder.fc.weight"), get("encoder.fc.bias"), 2 * d);

  std::vector<double> z(static_cast<std::size_t>(n * d));
  double kl = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) {
      const double c0 = h[i * 2 * d + j], c1 = h[i * 2 * d + d + j];
      const double e = base[i * d + j];
      if (s.gaussian) {
        const double ls = std::clamp(c1, -6.0, 6.0);
        z[i * d + j] = c0 + std::exp(ls) * e;
        kl += 0.5 * (c0 * c0 + std::exp(2 * ls) - 2 * ls - 1.0);
      } else {
        const double lm = std::clamp(c0, -6.0, 6.0);
        z[i * d + j] = -std::exp(lm) * std::log(1.0 - e);
        kl += -lm + std::exp(lm) - 1.0;
      }
    }
  kl /= static_cast<double>(n);

  const std::int64_t bs = s.input_size / 16;
  const auto seed = dense(z, n, d, get("decoder.fc.weight"), get("decoder.fc.bias"),
                          s.channels[3] * bs * bs);
  Array4 y(n, s.channels[3], bs, bs);
  y.v = seed;
  leaky_relu(y.v, s.slope);
  for (int i = 0; i < 4; ++i) {
    const std::string c = "decoder.deconv" + std::to_string(i), b = "decoder.bn" + std::to_string(i);
    const std::int64_t f = i < 3 ? s.channels[2 - i] : 1;
    y = conv2d_transpose(y, get(c + ".weight"), f, 4, get(c + ".bias"), 2, 1);
    if (i < 3) {
      y = batchnorm_train(y, get(b + ".gamma"), get(b + ".beta"));
      leaky_relu(y.v, s.slope);
    }
  }
  double nll = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-y.v[i]));
    nll += bernoulli_nll(prob, masks[i]);
  }
  nll /= static_cast<double>(y.v.size());
  return {nll + s.kl_weight * kl, kl, nll};
}

}  // namespace dgnet::ref

#endif  // DGNET_TESTS_SUPPORT_REFERENCE_H_
