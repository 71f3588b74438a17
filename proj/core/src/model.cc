#include "dgnet/model.h"

#include <cmath>
#include <string>

#include "dgnet/error.h"

namespace dgnet {

std::string family_name(LatentFamily family) {
  return family == LatentFamily::kGaussian ? "gauss" : "exp";
}

LatentFamily parse_family(std::string_view name) {
  if (name == "exp" || name == "exponential") return LatentFamily::kExponential;
  if (name == "gauss" || name == "gaussian") return LatentFamily::kGaussian;
  throw ValidationError("unknown latent family '" + std::string(name) +
                        "' (expected exp or gauss)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("model config: " + what); };
  if (input_size < 16 || input_size % (1 << kEncoderDepth) != 0) {
    fail("input_size must be a positive multiple of 16");
  }
  if (static_cast<int>(channels.size()) != kEncoderDepth) {
    fail("channels must list exactly 4 encoder widths");
  }
  for (std::int64_t c : channels) {
    if (c < 1) fail("channel widths must be >= 1");
  }
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (!(kl_weight >= 0.0f) || !std::isfinite(kl_weight)) fail("beta must be >= 0");
  if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) fail("leaky_slope must lie in [0, 1)");
  if (!(prior_scale > 0.0f) || !(prior_rate > 0.0f)) fail("prior parameters must be positive");
}

PriorSpec PriorSpec::from_config(const ModelConfig& config) {
  return {config.family, config.prior_scale, config.prior_rate};
}

namespace {

Tensor uniform_init(Shape shape, std::int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  const std::int64_t n = shape_numel(shape);
  std::vector<float> data(static_cast<std::size_t>(n));
  for (float& v : data) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor deep_copy(const Tensor& t) {
  if (!t.defined()) return t;
  Tensor c = t.detach();
  c.set_requires_grad(t.requires_grad());
  return c;
}

}  // namespace

DgNet::DgNet(ModelConfig config, Rng init_rng) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.channels;
  const std::int64_t k = kConvKernel;
  const std::int64_t s = config_.bottleneck_size();
  const std::int64_t flat = ch.back() * s * s;
  const std::int64_t d = config_.latent_dim;

  std::int64_t in_ch = 1;
  for (int i = 0; i < kEncoderDepth; ++i) {
    Block b;
    Rng r = init_rng.split("encoder").split(static_cast<std::uint64_t>(i));
    b.weight = uniform_init({ch[i], in_ch, k, k}, in_ch * k * k, r);
    b.gamma = Tensor::full({ch[i]}, 1.0f, true);
    b.beta = Tensor::zeros({ch[i]}, true);
    b.stats = BatchNormStats::identity(ch[i]);
    encoder_.push_back(std::move(b));
    in_ch = ch[i];
  }
  {
    Rng r = init_rng.split("encoder.fc");
    enc_fc_weight_ = uniform_init({flat, 2 * d}, flat, r);
    enc_fc_bias_ = uniform_init({2 * d}, flat, r);
  }
  {
    Rng r = init_rng.split("decoder.fc");
    dec_fc_weight_ = uniform_init({d, flat}, d, r);
    dec_fc_bias_ = uniform_init({flat}, d, r);
  }
  for (int i = 0; i < kEncoderDepth; ++i) {
    const std::int64_t c_in = ch[kEncoderDepth - 1 - i];
    const std::int64_t c_out = i + 1 < kEncoderDepth ? ch[kEncoderDepth - 2 - i] : 1;
    Block b;
    Rng r = init_rng.split("decoder").split(static_cast<std::uint64_t>(i));
    b.weight = uniform_init({c_in, c_out, k, k}, c_out * k * k, r);
    if (i + 1 == kEncoderDepth) {
      b.bias = uniform_init({c_out}, c_out * k * k, r);
    } else {
      b.gamma = Tensor::full({c_out}, 1.0f, true);
      b.beta = Tensor::zeros({c_out}, true);
      b.stats = BatchNormStats::identity(c_out);
    }
    decoder_.push_back(std::move(b));
  }
}

DgNet DgNet::clone() const {
  DgNet out;
  out.config_ = config_;
  for (const auto* src : {&encoder_, &decoder_}) {
    auto& dst = src == &encoder_ ? out.encoder_ : out.decoder_;
    for (const Block& b : *src) {
      dst.push_back({deep_copy(b.weight), deep_copy(b.bias), deep_copy(b.gamma),
                     deep_copy(b.beta), b.stats});
    }
  }
  out.enc_fc_weight_ = deep_copy(enc_fc_weight_);
  out.enc_fc_bias_ = deep_copy(enc_fc_bias_);
  out.dec_fc_weight_ = deep_copy(dec_fc_weight_);
  out.dec_fc_bias_ = deep_copy(dec_fc_bias_);
  return out;
}

LatentParams DgNet::encode(const Tensor& images, Mode mode) {
  const std::int64_t s = config_.input_size;
  if (!images.defined() || images.rank() != 4 || images.dim(1) != 1 ||
      images.dim(2) != s || images.dim(3) != s) {
    throw ShapeError("encode: expected [N,1," + std::to_string(s) + "," +
                     std::to_string(s) + "], got " +
                     (images.defined() ? shape_str(images.shape()) : "undefined"));
  }
  Tensor x = images;
  for (Block& b : encoder_) {
    x = conv2d(x, b.weight, b.bias, kConvStride, kConvPad);
    x = batchnorm2d(x, b.gamma, b.beta, b.stats, mode);
    x = leaky_relu(x, config_.leaky_slope);
  }
  const std::int64_t n = x.dim(0);
  x = reshape(x, {n, x.numel() / n});
  Tensor h = dense(x, enc_fc_weight_, enc_fc_bias_);
  const std::int64_t d = config_.latent_dim;
  return {slice_cols(h, 0, d), slice_cols(h, d, 2 * d), config_.family};
}

Tensor DgNet::decode(const Tensor& latent, Mode mode) {
  const std::int64_t d = config_.latent_dim;
  if (!latent.defined() || latent.rank() != 2 || latent.dim(1) != d) {
    throw ShapeError("decode: expected [N," + std::to_string(d) + "], got " +
                     (latent.defined() ? shape_str(latent.shape()) : "undefined"));
  }
  const std::int64_t n = latent.dim(0);
  const std::int64_t s = config_.bottleneck_size();
  Tensor x = dense(latent, dec_fc_weight_, dec_fc_bias_);
  x = reshape(x, {n, config_.channels.back(), s, s});
  x = leaky_relu(x, config_.leaky_slope);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    Block& b = decoder_[i];
    x = conv2d_transpose(x, b.weight, b.bias, kConvStride, kConvPad);
    if (i + 1 < decoder_.size()) {
      x = batchnorm2d(x, b.gamma, b.beta, b.stats, mode);
      x = leaky_relu(x, config_.leaky_slope);
    } else {
      x = sigmoid(x);
    }
  }
  return x;
}

std::vector<NamedTensor> DgNet::encoder_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string p = "encoder.conv" + std::to_string(i);
    const std::string q = "encoder.bn" + std::to_string(i);
    out.push_back({p + ".weight", encoder_[i].weight});
    out.push_back({q + ".gamma", encoder_[i].gamma});
    out.push_back({q + ".beta", encoder_[i].beta});
  }
  out.push_back({"encoder.fc.weight", enc_fc_weight_});
  out.push_back({"encoder.fc.bias", enc_fc_bias_});
  return out;
}

std::vector<NamedTensor> DgNet::decoder_parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"decoder.fc.weight", dec_fc_weight_});
  out.push_back({"decoder.fc.bias", dec_fc_bias_});
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string p = "decoder.deconv" + std::to_string(i);
    out.push_back({p + ".weight", decoder_[i].weight});
    if (decoder_[i].bias.defined()) out.push_back({p + ".bias", decoder_[i].bias});
    if (decoder_[i].gamma.defined()) {
      const std::string q = "decoder.bn" + std::to_string(i);
      out.push_back({q + ".gamma", decoder_[i].gamma});
      out.push_back({q + ".beta", decoder_[i].beta});
    }
  }
  return out;
}

std::vector<NamedTensor> DgNet::parameters() const {
  std::vector<NamedTensor> out = encoder_parameters();
  for (auto& p : decoder_parameters()) out.push_back(std::move(p));
  return out;
}

std::vector<DgNet::NamedStats> DgNet::batchnorm_stats() {
  std::vector<NamedStats> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    out.push_back({"encoder.bn" + std::to_string(i), &encoder_[i].stats});
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    if (decoder_[i].gamma.defined()) {
      out.push_back({"decoder.bn" + std::to_string(i), &decoder_[i].stats});
    }
  }
  return out;
}

std::vector<std::string> DgNet::batchnorm_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) out.push_back("encoder.bn" + std::to_string(i));
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    if (decoder_[i].gamma.defined()) out.push_back("decoder.bn" + std::to_string(i));
  }
  return out;
}

std::vector<BatchNormStats> DgNet::snapshot_stats() const {
  std::vector<BatchNormStats> out;
  for (const Block& b : encoder_) out.push_back(b.stats);
  for (const Block& b : decoder_) {
    if (b.gamma.defined()) out.push_back(b.stats);
  }
  return out;
}

void DgNet::restore_stats(const std::vector<BatchNormStats>& stats) {
  auto named = batchnorm_stats();
  if (named.size() != stats.size()) {
    throw ValidationError("restore_stats: batch-norm layer count mismatch");
  }
  for (std::size_t i = 0; i < named.size(); ++i) *named[i].stats = stats[i];
}

void DgNet::set_requires_grad(bool value) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(value);
}

void DgNet::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

namespace {

void require_latent_shapes(const LatentParams& lp, const char* op) {
  if (!lp.c0.defined() || !lp.c1.defined() || lp.c0.rank() != 2 ||
      lp.c0.shape() != lp.c1.shape()) {
    throw ShapeError(std::string(op) + ": latent channels must be matching [N,D] tensors");
  }
}

}  // namespace

Tensor reparameterize(const LatentParams& params, std::span<const float> base) {
  require_latent_shapes(params, "reparameterize");
  if (static_cast<std::int64_t>(base.size()) != params.c0.numel()) {
    throw ShapeError("reparameterize: base noise length does not match latent size");
  }
  if (params.family == LatentFamily::kGaussian) {
    Tensor eps = Tensor::from_data(params.c0.shape(), {base.begin(), base.end()});
    Tensor sd = exp(clamp(params.c1, kLogParamMin, kLogParamMax));
    return add(params.c0, mul(sd, eps));
  }
  std::vector<float> unit(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double u = base[i];
    if (!(u >= 0.0 && u < 1.0)) {
      throw ValidationError("reparameterize: uniform variates must lie in [0, 1)");
    }
    unit[i] = static_cast<float>(-std::log1p(-u));
  }
  Tensor e = Tensor::from_data(params.c0.shape(), std::move(unit));
  Tensor m = exp(clamp(params.c0, kLogParamMin, kLogParamMax));
  return mul(m, e);
}

Tensor sample_latent(const LatentParams& params, Rng& rng) {
  require_latent_shapes(params, "sample_latent");
  std::vector<float> base(static_cast<std::size_t>(params.c0.numel()));
  if (params.family == LatentFamily::kGaussian) {
    for (float& v : base) v = static_cast<float>(rng.normal());
  } else {
    for (float& v : base) v = rng.uniform_float();
  }
  return reparameterize(params, base);
}

Tensor latent_point_estimate(const LatentParams& params) {
  require_latent_shapes(params, "latent_point_estimate");
  if (params.family == LatentFamily::kGaussian) return params.c0;
  return exp(clamp(params.c0, kLogParamMin, kLogParamMax));
}

Tensor kl_term(const LatentParams& params, const PriorSpec& prior) {
  require_latent_shapes(params, "kl_term");
  if (params.family != prior.family) {
    throw ValidationError("kl_term: latent family " + family_name(params.family) +
                          " does not match prior family " + family_name(prior.family));
  }
  const float batch = static_cast<float>(params.c0.dim(0));
  Tensor per_dim;
  if (params.family == LatentFamily::kGaussian) {
    // ln(sp) - ln(s) + (s^2 + mu^2) / (2 sp^2) - 1/2
    Tensor log_s = clamp(params.c1, kLogParamMin, kLogParamMax);
    Tensor var = exp(scale(log_s, 2.0f));
    const float inv = 1.0f / (2.0f * prior.scale * prior.scale);
    per_dim = add_scalar(sub(scale(add(var, square(params.c0)), inv), log_s),
                         std::log(prior.scale) - 0.5f);
  } else {
    // KL(Exp(1/m) || Exp(r)) = -ln m - ln r + r m - 1
    Tensor log_m = clamp(params.c0, kLogParamMin, kLogParamMax);
    Tensor m = exp(log_m);
    per_dim = add_scalar(sub(scale(m, prior.rate), log_m), -std::log(prior.rate) - 1.0f);
  }
  return scale(sum(per_dim), 1.0f / batch);
}

Tensor seg_nll(const Tensor& prob, const Tensor& mask) {
  if (!prob.defined() || !mask.defined() || prob.shape() != mask.shape()) {
    throw ShapeError("seg_nll: probability and mask shapes differ");
  }
  for (float y : mask.data()) {
    if (y != 0.0f && y != 1.0f) throw ValidationError("seg_nll: mask must be binary");
  }
  Tensor p = clamp(prob, kProbEpsilon, 1.0f - kProbEpsilon);
  Tensor not_mask = add_scalar(scale(mask, -1.0f), 1.0f);
  Tensor ll = add(mul(mask, log(p)), mul(not_mask, log(add_scalar(scale(p, -1.0f), 1.0f))));
  return scale(mean(ll), -1.0f);
}

ElboTerms elbo_loss(DgNet& model, const Tensor& images, const Tensor& masks, Rng rng,
                    Mode mode) {
  LatentParams lp = model.encode(images, mode);
  Tensor z = sample_latent(lp, rng);
  Tensor prob = model.decode(z, mode);
  Tensor nll = seg_nll(prob, masks);
  Tensor kl = kl_term(lp, PriorSpec::from_config(model.config()));
  Tensor loss = add(nll, scale(kl, model.config().kl_weight));
  return {loss, kl, nll};
}

GradCheckResult model_grad_check(DgNet& model, const Tensor& images, const Tensor& masks,
                                 std::uint64_t noise_seed, const GradCheckOptions& options) {
  const auto saved = model.snapshot_stats();
  auto loss_fn = [&] { return elbo_loss(model, images, masks, Rng(noise_seed)).loss; };
  const auto params = model.parameters();
  GradCheckResult result = grad_check(loss_fn, params, options);
  model.restore_stats(saved);
  return result;
}

}  // namespace dgnet
