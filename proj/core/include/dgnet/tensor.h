#ifndef DGNET_TENSOR_H_
#define DGNET_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dgnet {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the dynamic autodiff graph. `data` never changes after an op
// writes it; only leaves may be mutated (by the optimizer) between graphs.
struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until needed
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads self.grad and accumulates into the grads of inputs that need it.
  std::function<void(Node& self)> backward;
};

}  // namespace detail

// Dense row-major float32 array with optional reverse-mode gradient tracking.
// Copies are shallow: two Tensor handles may refer to the same node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::int64_t dim(int i) const;
  std::int64_t numel() const;

  std::span<const float> data() const;
  // Leaves only: parameters are updated in place by the optimizer.
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  // Empty span when no gradient has been accumulated.
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Accumulates d(this)/d(leaf) into every reachable leaf requiring grad.
  // The receiver must be a scalar. May be called repeatedly on one graph.
  void backward() const;

  // A new leaf holding a copy of the data, disconnected from the graph.
  Tensor detach() const;

  const char* op_name() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

// NaN/Inf detection after every forward op. On by default in debug builds.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// While alive on this thread, ops record no autodiff graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_mode_enabled();

enum class Mode { kTrain, kEval };

struct BatchNormStats {
  std::vector<float> running_mean;
  std::vector<float> running_var;

  static BatchNormStats identity(std::int64_t channels);
};

struct BatchNormOptions {
  float epsilon = 1e-5f;
  // Weight of the previous running value in the moving average.
  float momentum = 0.9f;
};

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor add_scalar(const Tensor& a, float value);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
// Gradient passes where lo <= x <= hi and is zero elsewhere.
Tensor clamp(const Tensor& a, float lo, float hi);
// Numerically stable; results stay inside the open interval (0, 1).
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, float slope = 0.2f);

// Scalar reductions; accumulation is carried out in double precision.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& a, std::int64_t begin, std::int64_t end);

// input [N,D], weight [D,M], bias [M] -> [N,M].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Cross-correlation with zero padding.
// input [N,C,H,W], weight [F,C,k,k], bias [F] or undefined -> [N,F,H',W'],
// H' = (H + 2*pad - k) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad);

// Adjoint of conv2d's linear map plus bias.
// input [N,C,H,W], weight [C,F,k,k], bias [F] or undefined -> [N,F,H',W'],
// H' = (H - 1) * stride - 2*pad + k.
Tensor conv2d_transpose(const Tensor& input, const Tensor& weight,
                        const Tensor& bias, int stride, int pad);

// Per-channel normalization of [N,C,H,W]. Train mode uses batch statistics
// and updates `stats`; eval mode reads `stats`.
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma,
                   const Tensor& beta, BatchNormStats& stats, Mode mode,
                   const BatchNormOptions& options = {});

}  // namespace dgnet

#endif  // DGNET_TENSOR_H_
