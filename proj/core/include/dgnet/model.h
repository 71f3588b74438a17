#ifndef DGNET_MODEL_H_
#define DGNET_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgnet/grad_check.h"
#include "dgnet/rng.h"
#include "dgnet/tensor.h"

namespace dgnet {

enum class LatentFamily { kGaussian, kExponential };

// "gauss" / "exp"
std::string family_name(LatentFamily family);
// Accepts gauss, gaussian, exp, exponential.
LatentFamily parse_family(std::string_view name);

inline constexpr int kConvKernel = 4;
inline constexpr int kConvStride = 2;
inline constexpr int kConvPad = 1;
inline constexpr int kEncoderDepth = 4;
// Range applied to log-scale / log-mean channels before exponentiation.
inline constexpr float kLogParamMin = -6.0f;
inline constexpr float kLogParamMax = 6.0f;
// Probability clamp inside the segmentation likelihood.
inline constexpr float kProbEpsilon = 1e-7f;

struct ModelConfig {
  std::int64_t input_size = 256;
  std::vector<std::int64_t> channels{16, 32, 64, 128};
  std::int64_t latent_dim = 128;
  LatentFamily family = LatentFamily::kExponential;
  float kl_weight = 1.0f;
  float leaky_slope = 0.2f;
  // Prior: N(0, prior_scale^2) or Exp(prior_rate) per latent dimension.
  float prior_scale = 1.0f;
  float prior_rate = 1.0f;

  void validate() const;
  // Spatial side of the deepest feature map.
  std::int64_t bottleneck_size() const { return input_size >> kEncoderDepth; }
};

struct PriorSpec {
  LatentFamily family = LatentFamily::kExponential;
  float scale = 1.0f;
  float rate = 1.0f;

  static PriorSpec from_config(const ModelConfig& config);
};

// Two-channel latent distribution parameters, each [N, D].
// Gaussian: c0 = location, c1 = log-scale.
// Exponential: c0 = log-mean; c1 is emitted but unused so that checkpoints
// are interchangeable between families.
struct LatentParams {
  Tensor c0;
  Tensor c1;
  LatentFamily family = LatentFamily::kExponential;
};

// The inference (encoder) and generative (decoder) networks.
//
// Encoder: 4 x [conv k4 s2 p1 -> batchnorm -> leaky ReLU], flatten, dense to
// 2*D. Decoder: dense to the bottleneck map, leaky ReLU, 3 x [transposed conv
// -> batchnorm -> leaky ReLU], transposed conv -> sigmoid. Convolutions that
// feed a batchnorm carry no bias (its shift would be normalised away).
//
// Move-only: parameters are shared handles, use clone() for a deep copy.
class DgNet {
 public:
  // Fan-in scaled uniform initialisation, bound sqrt(1 / fan_in).
  DgNet(ModelConfig config, Rng init_rng);

  DgNet(DgNet&&) = default;
  DgNet& operator=(DgNet&&) = default;
  DgNet(const DgNet&) = delete;
  DgNet& operator=(const DgNet&) = delete;

  DgNet clone() const;

  const ModelConfig& config() const { return config_; }

  LatentParams encode(const Tensor& images, Mode mode);
  Tensor decode(const Tensor& latent, Mode mode);

  // Every trainable tensor in a fixed order: encoder first, then decoder.
  std::vector<NamedTensor> parameters() const;
  std::vector<NamedTensor> encoder_parameters() const;
  std::vector<NamedTensor> decoder_parameters() const;

  struct NamedStats {
    std::string name;
    BatchNormStats* stats;
  };
  std::vector<NamedStats> batchnorm_stats();
  // Same order as batchnorm_stats() and snapshot_stats().
  std::vector<std::string> batchnorm_names() const;
  std::vector<BatchNormStats> snapshot_stats() const;
  void restore_stats(const std::vector<BatchNormStats>& stats);

  void set_requires_grad(bool value);
  void zero_grad();

 private:
  struct Block {
    Tensor weight, bias;  // bias undefined ahead of a batchnorm
    Tensor gamma, beta;  // undefined for the final decoder block
    BatchNormStats stats;
  };

  DgNet() = default;

  ModelConfig config_;
  std::vector<Block> encoder_;
  Tensor enc_fc_weight_, enc_fc_bias_;
  Tensor dec_fc_weight_, dec_fc_bias_;
  std::vector<Block> decoder_;
};

// Reparameterised draw z ~ q(z | c0, c1); differentiable w.r.t. c0 (and c1
// for the Gaussian family).
Tensor sample_latent(const LatentParams& params, Rng& rng);
// Same map with explicit base variates: standard normals for the Gaussian
// family, uniforms in [0, 1) for the exponential family.
Tensor reparameterize(const LatentParams& params, std::span<const float> base);
// Deterministic latent used at inference time: the location c0 (Gaussian) or
// the mean exp(c0) (exponential).
Tensor latent_point_estimate(const LatentParams& params);

// KL(q || prior), summed over latent dimensions, averaged over the batch.
Tensor kl_term(const LatentParams& params, const PriorSpec& prior);

// Mean per-pixel Bernoulli negative log-likelihood of a binary mask.
Tensor seg_nll(const Tensor& prob, const Tensor& mask);

struct ElboTerms {
  Tensor loss;  // nll + kl_weight * kl
  Tensor kl;
  Tensor nll;
};

// Single-sample estimate of the negative evidence lower bound.
ElboTerms elbo_loss(DgNet& model, const Tensor& images, const Tensor& masks,
                    Rng rng, Mode mode = Mode::kTrain);

// Finite-difference check of elbo_loss gradients for every trainable entry.
// Batch-norm running statistics are restored afterwards.
GradCheckResult model_grad_check(DgNet& model, const Tensor& images,
                                 const Tensor& masks, std::uint64_t noise_seed,
                                 const GradCheckOptions& options = {});

}  // namespace dgnet

#endif  // DGNET_MODEL_H_
