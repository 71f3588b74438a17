#ifndef DGNET_TRAINER_H_
#define DGNET_TRAINER_H_

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dgnet/image.h"
#include "dgnet/model.h"
#include "dgnet/speckle.h"

namespace dgnet {

// Training schedule. The KL weight and latent family live in ModelConfig.
struct TrainConfig {
  std::int64_t epochs = 160;
  std::int64_t batch_size = 1;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  std::string curve_path;       // empty: not written
  std::string checkpoint_path;  // empty: not written
  // Alternate a KL-only encoder update with an NLL-only decoder update
  // instead of one joint update of both on the full loss.
  bool alternating = false;

  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

// One bias-corrected Adam update of every parameter that requires grad,
// using its accumulated gradient (absent gradient = zero). Moment buffers are
// created on the first call; later calls must present the same shapes.
void adam_step(std::span<const NamedTensor> params, AdamState& state,
               double learning_rate);

struct CurveRecord {
  std::int64_t epoch = 0;
  double loss = 0.0;
  double kl = 0.0;
  double nll = 0.0;
};

struct TrainResult {
  DgNet model;
  std::vector<CurveRecord> curve;
};

using EpochCallback = std::function<void(const CurveRecord&)>;

// Mini-batch training on the negative ELBO. Batches are drawn in an order
// shuffled by (seed, epoch); one record per epoch holds sample-weighted means.
TrainResult train(std::span<const SceneSample> dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

// Header `epoch,loss,kl,nll`; floats with 9 significant digits.
void write_curve_csv(std::span<const CurveRecord> curve, std::ostream& out);
void write_curve_csv(std::span<const CurveRecord> curve, const std::string& path);

// [B,1,H,W] batch from equally sized images.
Tensor stack_images(std::span<const Image* const> images);

struct Segmentation {
  Image prob;  // values in (0, 1)
  Image mask;  // 1 where prob >= threshold
};

// Eval-mode encode, deterministic latent point estimate, eval-mode decode.
Segmentation segment(DgNet& model, const Image& image, float threshold = 0.5f);

}  // namespace dgnet

#endif  // DGNET_TRAINER_H_
