#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dgnet/error.h"
#include "dgnet/tensor.h"
#include "kernels.h"

namespace dgnet {

namespace {

using detail::Node;

void check_finite(const char* op, const std::vector<float>& data) {
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  if (finite_checks_enabled()) check_finite(op, data);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  const bool needs_grad = grad_mode_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                      [](const Tensor& t) { return t.requires_grad(); });
  if (needs_grad) {
    node->requires_grad = true;
    // Undefined optional inputs keep their slot as a null node.
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

// Gradient buffer of an input, or nullptr if it takes no gradient.
float* grad_target(Node& input) {
  if (!input.requires_grad) return nullptr;
  if (input.grad.empty()) input.grad.assign(input.data.size(), 0.0f);
  return input.grad.data();
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ValidationError(std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, int rank, const char* op, const char* what) {
  require_defined(t, op);
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

// y = f(x) elementwise; dfdx(x, y) gives the local derivative.
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
  require_defined(a, op);
  auto x = a.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_result(op, a.shape(), std::move(out), {a}, [dfdx](Node& self) {
    Node& in = *self.inputs[0];
    float* g = grad_target(in);
    if (!g) return;
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      g[i] += self.grad[i] * dfdx(in.data[i], self.data[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      if (float* g = grad_target(*self.inputs[k])) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (float* g = grad_target(*self.inputs[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (float* g = grad_target(*self.inputs[1])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    if (float* g = grad_target(l)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * r.data[i];
    }
    if (float* g = grad_target(r)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * l.data[i];
    }
  });
}

Tensor scale(const Tensor& a, float factor) {
  return unary(
      "scale", a, [factor](float x) { return x * factor; },
      [factor](float, float) { return factor; });
}

Tensor add_scalar(const Tensor& a, float value) {
  return unary(
      "add_scalar", a, [value](float x) { return x + value; },
      [](float, float) { return 1.0f; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](float x) { return std::exp(x); },
      [](float, float y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](float x) { return std::log(x); },
      [](float x, float) { return 1.0f / x; });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](float x) { return x * x; },
      [](float x, float) { return 2.0f * x; });
}

Tensor clamp(const Tensor& a, float lo, float hi) {
  if (!(lo <= hi)) throw ValidationError("clamp: lo must not exceed hi");
  return unary(
      "clamp", a, [lo, hi](float x) { return std::clamp(x, lo, hi); },
      [lo, hi](float x, float) { return (x >= lo && x <= hi) ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& a) {
  constexpr float kLo = std::numeric_limits<float>::min();
  const float kHi = std::nextafter(1.0f, 0.0f);
  return unary(
      "sigmoid", a,
      [kLo, kHi](float x) {
        const double xd = x;
        const double s = xd >= 0.0 ? 1.0 / (1.0 + std::exp(-xd))
                                   : std::exp(xd) / (1.0 + std::exp(xd));
        return std::clamp(static_cast<float>(s), kLo, kHi);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor leaky_relu(const Tensor& a, float slope) {
  if (!(slope >= 0.0f && slope < 1.0f)) {
    throw ValidationError("leaky_relu: slope must lie in [0, 1)");
  }
  return unary(
      "leaky_relu", a, [slope](float x) { return x >= 0.0f ? x : slope * x; },
      [slope](float x, float) { return x >= 0.0f ? 1.0f : slope; });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  return make_result("sum", {1}, {static_cast<float>(acc)}, {a}, [](Node& self) {
    if (float* g = grad_target(*self.inputs[0])) {
      const float gs = self.grad[0];
      for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) g[i] += gs;
    }
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  const double n = static_cast<double>(a.numel());
  return make_result("mean", {1}, {static_cast<float>(acc / n)}, {a},
                     [n](Node& self) {
                       if (float* g = grad_target(*self.inputs[0])) {
                         const float gs = static_cast<float>(self.grad[0] / n);
                         for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) {
                           g[i] += gs;
                         }
                       }
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<float> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    if (float* g = grad_target(*self.inputs[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::int64_t begin, std::int64_t end) {
  require_rank(a, 2, "slice_cols", "input");
  const std::int64_t rows = a.dim(0), cols = a.dim(1);
  if (begin < 0 || end > cols || begin >= end) {
    throw ShapeError("slice_cols: invalid range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") for " + shape_str(a.shape()));
  }
  const std::int64_t width = end - begin;
  auto x = a.data();
  std::vector<float> out(static_cast<std::size_t>(rows * width));
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(x.begin() + r * cols + begin, width, out.begin() + r * width);
  }
  return make_result("slice_cols", {rows, width}, std::move(out), {a},
                     [rows, cols, begin, width](Node& self) {
                       if (float* g = grad_target(*self.inputs[0])) {
                         for (std::int64_t r = 0; r < rows; ++r) {
                           for (std::int64_t c = 0; c < width; ++c) {
                             g[r * cols + begin + c] += self.grad[r * width + c];
                           }
                         }
                       }
                     });
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense", "input");
  require_rank(weight, 2, "dense", "weight");
  require_rank(bias, 1, "dense", "bias");
  const std::int64_t n = input.dim(0), d = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d || bias.dim(0) != m) {
    throw ShapeError("dense: input " + shape_str(input.shape()) + ", weight " +
                     shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()) +
                     " do not conform");
  }
  std::vector<float> out(static_cast<std::size_t>(n * m));
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy(bias.data().begin(), bias.data().end(), out.begin() + i * m);
  }
  kernels::gemm_nn(n, m, d, input.data().data(), weight.data().data(), out.data(), true);
  return make_result("dense", {n, m}, std::move(out), {input, weight, bias},
                     [n, d, m](Node& self) {
                       Node& x = *self.inputs[0];
                       Node& w = *self.inputs[1];
                       const float* gy = self.grad.data();
                       if (float* gx = grad_target(x)) {
                         kernels::gemm_nt(n, d, m, gy, w.data.data(), gx, true);
                       }
                       if (float* gw = grad_target(w)) {
                         kernels::gemm_tn(d, m, n, x.data.data(), gy, gw, true);
                       }
                       if (float* gb = self.inputs[2] ? grad_target(*self.inputs[2]) : nullptr) {
                         for (std::int64_t j = 0; j < m; ++j) {
                           double acc = gb[j];
                           for (std::int64_t i = 0; i < n; ++i) acc += gy[i * m + j];
                           gb[j] = static_cast<float>(acc);
                         }
                       }
                     });
}

namespace {

void check_conv_args(const char* op, int stride, int pad, std::int64_t k) {
  if (stride < 1) throw ValidationError(std::string(op) + ": stride must be >= 1");
  if (pad < 0) throw ValidationError(std::string(op) + ": pad must be >= 0");
  if (k < 1) throw ValidationError(std::string(op) + ": kernel must be >= 1");
}

void add_channel_bias(float* out, const float* bias, std::int64_t channels,
                      std::int64_t plane) {
  for (std::int64_t c = 0; c < channels; ++c) {
    std::fill(out + c * plane, out + (c + 1) * plane, bias[c]);
  }
}

void accumulate_channel_bias_grad(float* gb, const float* gy, std::int64_t batch,
                                  std::int64_t channels, std::int64_t plane) {
  for (std::int64_t c = 0; c < channels; ++c) {
    double acc = gb[c];
    for (std::int64_t b = 0; b < batch; ++b) {
      const float* p = gy + (b * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
    }
    gb[c] = static_cast<float>(acc);
  }
}

std::string bias_str(const Tensor& bias) {
  return bias.defined() ? ", bias " + shape_str(bias.shape()) : std::string();
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (bias.defined()) require_rank(bias, 1, "conv2d", "bias");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                     w = input.dim(3);
  const std::int64_t f = weight.dim(0), k = weight.dim(2);
  check_conv_args("conv2d", stride, pad, k);
  if (weight.dim(1) != c || weight.dim(3) != k || (bias.defined() && bias.dim(0) != f)) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + ", weight " +
                     shape_str(weight.shape()) + bias_str(bias) + " do not conform");
  }
  if (h + 2 * pad < k || w + 2 * pad < k) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) +
                     " larger than padded input " + shape_str(input.shape()));
  }
  kernels::ConvGeometry g{c, h, w, k, stride, pad,
                          (h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1};
  const std::int64_t rows = g.col_rows(), cols = g.col_cols();
  const std::int64_t in_plane = c * h * w, out_plane = f * cols;

  auto columns = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n * rows * cols));
  std::vector<float> out(static_cast<std::size_t>(n * out_plane));
  for (std::int64_t b = 0; b < n; ++b) {
    float* col = columns->data() + b * rows * cols;
    kernels::im2col(g, input.data().data() + b * in_plane, col);
    float* o = out.data() + b * out_plane;
    if (bias.defined()) add_channel_bias(o, bias.data().data(), f, cols);
    kernels::gemm_nn(f, cols, rows, weight.data().data(), col, o, true);
  }
  return make_result(
      "conv2d", {n, f, g.out_height, g.out_width}, std::move(out), {input, weight, bias},
      [g, n, f, rows, cols, in_plane, out_plane, columns](Node& self) {
        Node& x = *self.inputs[0];
        Node& wt = *self.inputs[1];
        float* gx = grad_target(x);
        float* gw = grad_target(wt);
        std::vector<float> dcol(gx ? static_cast<std::size_t>(rows * cols) : 0);
        for (std::int64_t b = 0; b < n; ++b) {
          const float* gy = self.grad.data() + b * out_plane;
          if (gw) {
            kernels::gemm_nt(f, rows, cols, gy, columns->data() + b * rows * cols, gw, true);
          }
          if (gx) {
            kernels::gemm_tn(rows, cols, f, wt.data.data(), gy, dcol.data(), false);
            kernels::col2im(g, dcol.data(), gx + b * in_plane);
          }
        }
        if (float* gb = self.inputs[2] ? grad_target(*self.inputs[2]) : nullptr) {
          accumulate_channel_bias_grad(gb, self.grad.data(), n, f, cols);
        }
      });
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& weight,
                        const Tensor& bias, int stride, int pad) {
  require_rank(input, 4, "conv2d_transpose", "input");
  require_rank(weight, 4, "conv2d_transpose", "weight");
  if (bias.defined()) require_rank(bias, 1, "conv2d_transpose", "bias");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                     w = input.dim(3);
  const std::int64_t f = weight.dim(1), k = weight.dim(2);
  check_conv_args("conv2d_transpose", stride, pad, k);
  if (weight.dim(0) != c || weight.dim(3) != k || (bias.defined() && bias.dim(0) != f)) {
    throw ShapeError("conv2d_transpose: input " + shape_str(input.shape()) +
                     ", weight " + shape_str(weight.shape()) + bias_str(bias) +
                     " do not conform");
  }
  const std::int64_t ho = (h - 1) * stride - 2 * pad + k;
  const std::int64_t wo = (w - 1) * stride - 2 * pad + k;
  if (ho < 1 || wo < 1) {
    throw ShapeError("conv2d_transpose: empty output for input " +
                     shape_str(input.shape()));
  }
  // The output image plays the role of conv2d's input.
  kernels::ConvGeometry g{f, ho, wo, k, stride, pad, h, w};
  const std::int64_t rows = g.col_rows(), cols = g.col_cols();
  const std::int64_t in_plane = c * cols, out_plane = f * ho * wo;

  std::vector<float> out(static_cast<std::size_t>(n * out_plane));
  std::vector<float> col(static_cast<std::size_t>(rows * cols));
  for (std::int64_t b = 0; b < n; ++b) {
    float* o = out.data() + b * out_plane;
    if (bias.defined()) add_channel_bias(o, bias.data().data(), f, ho * wo);
    kernels::gemm_tn(rows, cols, c, weight.data().data(),
                     input.data().data() + b * in_plane, col.data(), false);
    kernels::col2im(g, col.data(), o);
  }
  return make_result(
      "conv2d_transpose", {n, f, ho, wo}, std::move(out), {input, weight, bias},
      [g, n, c, rows, cols, in_plane, out_plane](Node& self) {
        Node& x = *self.inputs[0];
        Node& wt = *self.inputs[1];
        float* gx = grad_target(x);
        float* gw = grad_target(wt);
        if (gx || gw) {
          std::vector<float> dcol(static_cast<std::size_t>(rows * cols));
          for (std::int64_t b = 0; b < n; ++b) {
            kernels::im2col(g, self.grad.data() + b * out_plane, dcol.data());
            if (gx) {
              kernels::gemm_nn(c, cols, rows, wt.data.data(), dcol.data(),
                               gx + b * in_plane, true);
            }
            if (gw) {
              kernels::gemm_nt(c, rows, cols, x.data.data() + b * in_plane,
                               dcol.data(), gw, true);
            }
          }
        }
        if (float* gb = self.inputs[2] ? grad_target(*self.inputs[2]) : nullptr) {
          accumulate_channel_bias_grad(gb, self.grad.data(), n, g.channels,
                                       g.height * g.width);
        }
      });
}

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormStats& stats, Mode mode,
                   const BatchNormOptions& options) {
  require_rank(input, 4, "batchnorm2d", "input");
  require_rank(gamma, 1, "batchnorm2d", "gamma");
  require_rank(beta, 1, "batchnorm2d", "beta");
  const std::int64_t n = input.dim(0), c = input.dim(1);
  const std::int64_t plane = input.dim(2) * input.dim(3);
  const std::int64_t count = n * plane;
  if (count == 0) throw ValidationError("batchnorm2d: zero-size batch");
  if (gamma.dim(0) != c || beta.dim(0) != c) {
    throw ShapeError("batchnorm2d: gamma/beta length must equal channel count " +
                     std::to_string(c));
  }
  if (static_cast<std::int64_t>(stats.running_mean.size()) != c ||
      static_cast<std::int64_t>(stats.running_var.size()) != c) {
    throw ShapeError("batchnorm2d: running statistics do not match channel count");
  }

  auto x = input.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  std::vector<float> xhat(x.size());
  std::vector<float> out(x.size());
  std::vector<float> inv_std(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (mode == Mode::kTrain) {
      double s = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const float* p = x.data() + (b * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) s += p[i];
      }
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const float* p = x.data() + (b * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      var = ss / static_cast<double>(count);
      const double m = options.momentum;
      stats.running_mean[ch] =
          static_cast<float>(m * stats.running_mean[ch] + (1.0 - m) * mu);
      stats.running_var[ch] =
          static_cast<float>(m * stats.running_var[ch] + (1.0 - m) * var);
    } else {
      mu = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const double is = 1.0 / std::sqrt(var + options.epsilon);
    inv_std[ch] = static_cast<float>(is);
    for (std::int64_t b = 0; b < n; ++b) {
      const std::int64_t off = (b * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double xh = (x[off + i] - mu) * is;
        xhat[off + i] = static_cast<float>(xh);
        out[off + i] = static_cast<float>(gm[ch] * xh + bt[ch]);
      }
    }
  }

  return make_result(
      "batchnorm2d", input.shape(), std::move(out), {input, gamma, beta},
      [n, c, plane, count, mode, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        const float* gy = self.grad.data();
        float* gx = grad_target(*self.inputs[0]);
        float* gg = grad_target(*self.inputs[1]);
        float* gb = grad_target(*self.inputs[2]);
        const auto& gmv = self.inputs[1]->data;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          double sum_gy = 0.0, sum_gy_xh = 0.0;
          for (std::int64_t b = 0; b < n; ++b) {
            const std::int64_t off = (b * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
              sum_gy += gy[off + i];
              sum_gy_xh += static_cast<double>(gy[off + i]) * xhat[off + i];
            }
          }
          if (gg) gg[ch] = static_cast<float>(gg[ch] + sum_gy_xh);
          if (gb) gb[ch] = static_cast<float>(gb[ch] + sum_gy);
          if (!gx) continue;
          const double scale_in = static_cast<double>(gmv[ch]) * inv_std[ch];
          const double m = static_cast<double>(count);
          for (std::int64_t b = 0; b < n; ++b) {
            const std::int64_t off = (b * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
              double d;
              if (mode == Mode::kTrain) {
                d = scale_in * (gy[off + i] - sum_gy / m - xhat[off + i] * sum_gy_xh / m);
              } else {
                d = scale_in * gy[off + i];
              }
              gx[off + i] = static_cast<float>(gx[off + i] + d);
            }
          }
        }
      });
}

}  // namespace dgnet
