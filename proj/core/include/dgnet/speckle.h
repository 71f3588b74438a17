#ifndef DGNET_SPECKLE_H_
#define DGNET_SPECKLE_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/image.h"
#include "dgnet/rng.h"

namespace dgnet {

// Single-look intensity law p(I) = rate * exp(-rate * I), I >= 0.
// The mean intensity 1/rate is the product of the system constant and the
// radar cross section; the two factors are not separately identifiable, so
// only their product is stored.
class ExponentialModel {
 public:
  explicit ExponentialModel(double rate);
  static ExponentialModel from_mean(double mean);

  double rate() const { return rate_; }
  double mean() const { return 1.0 / rate_; }
  double stddev() const { return 1.0 / rate_; }

 private:
  double rate_;
};

// Zero for x < 0.
double exp_pdf(double x, const ExponentialModel& model);
double exp_cdf(double x, const ExponentialModel& model);
// Inverse CDF: -ln(1 - u) / rate for u in [0, 1).
double exp_quantile(double u, const ExponentialModel& model);
std::vector<double> exp_sample(const ExponentialModel& model, Rng& rng,
                               std::int64_t n);
// Maximum-likelihood rate n / sum(x). Throws on empty, negative or all-zero
// input.
ExponentialModel exp_fit_mle(std::span<const double> samples);
// MLE over the pixels of `image` where `mask` equals `label`.
ExponentialModel exp_fit_region(const Image& image, const Image& mask,
                                float label);
// KL(Exp(p) || Exp(q)) = ln(p/q) + q/p - 1.
double exp_kl(const ExponentialModel& p, const ExponentialModel& q);

struct SceneConfig {
  std::int64_t size = 64;
  double sea_mean = 1.0;
  // sea_mean / oil_mean
  double oil_contrast = 5.0;
  std::pair<int, int> blob_count_range{1, 3};
  double lookalike_prob = 0.3;
  // sea_mean / lookalike_mean; strictly between 1 and oil_contrast.
  double lookalike_contrast = 2.5;
  std::uint64_t seed = 0;
  std::pair<double, double> mask_fraction_bounds{0.1, 0.3};
  int max_retries = 200;

  // Throws ValidationError describing the first violated constraint.
  void validate() const;
};

struct SceneMeta {
  std::uint64_t stream_key = 0;
  double oil_fraction = 0.0;
  int blob_count = 0;
  bool has_lookalike = false;
  double lookalike_fraction = 0.0;
  double oil_smoothing = 0.0;
  double lookalike_smoothing = 0.0;
  int attempts = 0;
};

struct SceneSample {
  Image image;  // intensities >= 0
  Image mask;   // 1 = oil; look-alike pixels are 0
  // 1 where a look-alike patch was painted (not part of the ground truth).
  Image lookalike;
  SceneMeta meta;
};

// Irregular oil blobs from thresholded Gaussian-smoothed noise, optional
// look-alike patches, and exponential speckle with per-region means.
SceneSample synth_scene(const SceneConfig& config, Rng& rng);

// Writes `count` scenes under out_dir (images/, masks/, manifest.tsv,
// meta.txt) and returns the manifest path. Scene i uses the stream
// Rng(config.seed).split(i).
std::filesystem::path synth_dataset(const SceneConfig& config, std::int64_t count,
                                    const std::filesystem::path& out_dir);

// Value at the given quantile (nearest rank) of the image pixels.
double percentile(std::span<const float> values, double q);

// Number of 4-connected foreground components.
int count_components(const Image& mask);

}  // namespace dgnet

#endif  // DGNET_SPECKLE_H_
