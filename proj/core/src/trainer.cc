#include "dgnet/trainer.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dgnet/checkpoint.h"
#include "dgnet/error.h"

namespace dgnet {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("train config: learning_rate must be positive");
  }
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, double learning_rate) {
  if (state.m.empty() && state.v.empty()) {
    for (const NamedTensor& p : params) {
      state.m.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
      state.v.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter count does not match optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (static_cast<std::int64_t>(state.m[i].size()) != params[i].tensor.numel() ||
        state.v[i].size() != state.m[i].size()) {
      throw ShapeError("adam_step: moment buffers do not match " + params[i].name);
    }
  }

  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    if (!t.requires_grad()) continue;
    auto grad = t.grad();
    auto data = t.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      const double mj = b1 * m[j] + (1.0 - b1) * g;
      const double vj = b2 * v[j] + (1.0 - b2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double m_hat = mj / correction1;
      const double v_hat = vj / correction2;
      data[j] = static_cast<float>(data[j] - learning_rate * m_hat /
                                                 (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

Tensor stack_images(std::span<const Image* const> images) {
  if (images.empty()) throw ValidationError("stack_images: empty batch");
  const std::int64_t h = images[0]->height, w = images[0]->width;
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(images.size() * h * w));
  for (const Image* img : images) {
    if (img->height != h || img->width != w) {
      throw ShapeError("stack_images: images in a batch must share one size");
    }
    data.insert(data.end(), img->pixels.begin(), img->pixels.end());
  }
  return Tensor::from_data({static_cast<std::int64_t>(images.size()), 1, h, w},
                           std::move(data));
}

TrainResult train(std::span<const SceneSample> dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  train_config.validate();
  model_config.validate();
  if (dataset.empty()) throw ValidationError("train: empty dataset");
  for (const SceneSample& s : dataset) {
    if (s.image.height != model_config.input_size || s.image.width != model_config.input_size ||
        s.mask.height != s.image.height || s.mask.width != s.image.width) {
      throw ShapeError("train: every image and mask must be " +
                       std::to_string(model_config.input_size) + " pixels square");
    }
    if (!is_binary(s.mask)) throw ValidationError("train: masks must be binary");
  }

  const Rng root(train_config.seed);
  TrainResult result{DgNet(model_config, root.split("init")), {}};
  DgNet& model = result.model;
  const auto all_params = model.parameters();
  const auto enc_params = model.encoder_parameters();
  const auto dec_params = model.decoder_parameters();
  AdamState joint_state, enc_state, dec_state;

  const auto n = static_cast<std::int64_t>(dataset.size());
  const std::int64_t bs = train_config.batch_size;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = root.split("shuffle").split(static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(shuffle.uniform_int(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0, kl_sum = 0.0, nll_sum = 0.0;
    const Rng epoch_noise = root.split("latent").split(static_cast<std::uint64_t>(epoch));
    for (std::int64_t start = 0, batch = 0; start < n; start += bs, ++batch) {
      const std::int64_t end = std::min(n, start + bs);
      std::vector<const Image*> images, masks;
      for (std::int64_t k = start; k < end; ++k) {
        images.push_back(&dataset[order[k]].image);
        masks.push_back(&dataset[order[k]].mask);
      }
      const Tensor x = stack_images(images);
      const Tensor y = stack_images(masks);
      ElboTerms terms = elbo_loss(model, x, y, epoch_noise.split(static_cast<std::uint64_t>(batch)),
                                  Mode::kTrain);
      if (!train_config.alternating) {
        model.zero_grad();
        terms.loss.backward();
        adam_step(all_params, joint_state, train_config.learning_rate);
      } else {
        // Min-step on the encoder via the KL term, then max-step on the
        // decoder via the likelihood term.
        model.zero_grad();
        terms.kl.backward();
        adam_step(enc_params, enc_state, train_config.learning_rate);
        model.zero_grad();
        terms.nll.backward();
        adam_step(dec_params, dec_state, train_config.learning_rate);
      }
      const auto weight = static_cast<double>(end - start);
      loss_sum += weight * terms.loss.item();
      kl_sum += weight * terms.kl.item();
      nll_sum += weight * terms.nll.item();
    }
    const auto total = static_cast<double>(n);
    result.curve.push_back({epoch, loss_sum / total, kl_sum / total, nll_sum / total});
    if (on_epoch) on_epoch(result.curve.back());
  }
  model.zero_grad();

  if (!train_config.checkpoint_path.empty()) {
    save_checkpoint(model, train_config.checkpoint_path);
  }
  if (!train_config.curve_path.empty()) {
    write_curve_csv(result.curve, train_config.curve_path);
  }
  return result;
}

void write_curve_csv(std::span<const CurveRecord> curve, std::ostream& out) {
  out << "epoch,loss,kl,nll\n";
  char line[160];
  for (const CurveRecord& r : curve) {
    std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(r.epoch), r.loss, r.kl, r.nll);
    out << line;
  }
}

void write_curve_csv(std::span<const CurveRecord> curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_curve_csv(curve, out);
  if (!out) throw IoError("write failed: " + path);
}

Segmentation segment(DgNet& model, const Image& image, float threshold) {
  NoGradGuard no_grad;
  const Image* one[] = {&image};
  LatentParams lp = model.encode(stack_images(one), Mode::kEval);
  Tensor prob = model.decode(latent_point_estimate(lp), Mode::kEval);
  Segmentation out;
  out.prob = Image(image.height, image.width);
  std::copy(prob.data().begin(), prob.data().end(), out.prob.pixels.begin());
  out.mask = dgnet::threshold(out.prob, threshold);
  return out;
}

}  // namespace dgnet
