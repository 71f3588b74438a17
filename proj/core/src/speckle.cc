#include "dgnet/speckle.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dgnet/error.h"
#include "dgnet/pgm.h"

namespace dgnet {

ExponentialModel::ExponentialModel(double rate) : rate_(rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ValidationError("exponential rate must be positive and finite");
  }
}

ExponentialModel ExponentialModel::from_mean(double mean) {
  if (!(mean > 0.0)) throw ValidationError("exponential mean must be positive");
  return ExponentialModel(1.0 / mean);
}

double exp_pdf(double x, const ExponentialModel& model) {
  if (x < 0.0) return 0.0;
  return model.rate() * std::exp(-model.rate() * x);
}

double exp_cdf(double x, const ExponentialModel& model) {
  if (x < 0.0) return 0.0;
  return -std::expm1(-model.rate() * x);
}

double exp_quantile(double u, const ExponentialModel& model) {
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("quantile level must lie in [0, 1)");
  return -std::log1p(-u) / model.rate();
}

std::vector<double> exp_sample(const ExponentialModel& model, Rng& rng,
                               std::int64_t n) {
  if (n < 1) throw ValidationError("exp_sample: n must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& x : out) x = exp_quantile(rng.uniform(), model);
  return out;
}

ExponentialModel exp_fit_mle(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("exp_fit_mle: no samples");
  double total = 0.0;
  for (double x : samples) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ValidationError("exp_fit_mle: samples must be finite and non-negative");
    }
    total += x;
  }
  if (total == 0.0) throw ValidationError("exp_fit_mle: all samples are zero");
  return ExponentialModel(static_cast<double>(samples.size()) / total);
}

ExponentialModel exp_fit_region(const Image& image, const Image& mask, float label) {
  if (image.height != mask.height || image.width != mask.width) {
    throw ValidationError("exp_fit_region: image and mask shapes differ");
  }
  std::vector<double> values;
  for (std::int64_t i = 0; i < image.size(); ++i) {
    if (mask.pixels[i] == label) values.push_back(image.pixels[i]);
  }
  return exp_fit_mle(values);
}

double exp_kl(const ExponentialModel& p, const ExponentialModel& q) {
  const double ratio = q.rate() / p.rate();
  // ln(p/q) + q/p - 1 = ratio - 1 - ln(ratio)
  return ratio - 1.0 - std::log(ratio);
}

void SceneConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("scene config: " + what); };
  if (size < 8) fail("size must be >= 8");
  if (!(sea_mean > 0.0) || !std::isfinite(sea_mean)) fail("sea_mean must be positive");
  if (!(oil_contrast > 1.0) || !std::isfinite(oil_contrast)) {
    fail("oil_contrast must exceed 1");
  }
  if (!(lookalike_contrast > 1.0 && lookalike_contrast < oil_contrast)) {
    fail("lookalike_contrast must lie strictly between 1 and oil_contrast");
  }
  if (!(lookalike_prob >= 0.0 && lookalike_prob <= 1.0)) {
    fail("lookalike_prob must lie in [0, 1]");
  }
  if (blob_count_range.first < 1 || blob_count_range.first > blob_count_range.second) {
    fail("blob_count_range must satisfy 1 <= min <= max");
  }
  const auto [lo, hi] = mask_fraction_bounds;
  if (!(lo > 0.0 && lo <= hi && hi < 1.0)) {
    fail("mask_fraction_bounds must satisfy 0 < min <= max < 1");
  }
  if (max_retries < 1) fail("max_retries must be >= 1");
}

double percentile(std::span<const float> values, double q) {
  if (values.empty()) throw ValidationError("percentile of empty data");
  std::vector<float> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::int64_t>(std::ceil(q * n));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

int count_components(const Image& mask) {
  std::vector<char> seen(mask.pixels.size(), 0);
  std::vector<std::int64_t> stack;
  int components = 0;
  for (std::int64_t start = 0; start < mask.size(); ++start) {
    if (mask.pixels[start] == 0.0f || seen[start]) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::int64_t p = stack.back();
      stack.pop_back();
      const std::int64_t y = p / mask.width, x = p % mask.width;
      const std::int64_t nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& nb : nbrs) {
        if (nb[0] < 0 || nb[0] >= mask.height || nb[1] < 0 || nb[1] >= mask.width) continue;
        const std::int64_t q = nb[0] * mask.width + nb[1];
        if (mask.pixels[q] != 0.0f && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
  }
  return components;
}

namespace {

std::int64_t reflect(std::int64_t i, std::int64_t n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

// Separable Gaussian blur with reflected borders.
Image gaussian_blur(const Image& src, double sigma) {
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    norm += taps[i + radius];
  }
  for (double& t : taps) t /= norm;

  Image tmp(src.height, src.width), out(src.height, src.width);
  for (std::int64_t y = 0; y < src.height; ++y) {
    for (std::int64_t x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (std::int64_t i = -radius; i <= radius; ++i) {
        acc += taps[i + radius] * src.at(y, reflect(x + i, src.width));
      }
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  for (std::int64_t y = 0; y < src.height; ++y) {
    for (std::int64_t x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (std::int64_t i = -radius; i <= radius; ++i) {
        acc += taps[i + radius] * tmp.at(reflect(y + i, src.height), x);
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

void standardize(Image& img) {
  double mu = 0.0, ss = 0.0;
  for (float v : img.pixels) mu += v;
  mu /= static_cast<double>(img.size());
  for (float v : img.pixels) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / static_cast<double>(img.size()));
  for (float& v : img.pixels) v = static_cast<float>((v - mu) / (sd > 0 ? sd : 1.0));
}

// A coarse smoothed-noise field with a weaker fine-scale component that
// roughens the level-set boundaries.
Image blob_field(std::int64_t size, double sigma, Rng& rng) {
  Image coarse(size, size), fine(size, size);
  for (float& v : coarse.pixels) v = static_cast<float>(rng.normal());
  for (float& v : fine.pixels) v = static_cast<float>(rng.normal());
  coarse = gaussian_blur(coarse, sigma);
  fine = gaussian_blur(fine, std::max(1.0, sigma / 4.0));
  standardize(coarse);
  standardize(fine);
  for (std::int64_t i = 0; i < coarse.size(); ++i) {
    coarse.pixels[i] += 0.25f * fine.pixels[i];
  }
  return coarse;
}

// Marks the `count` largest field values (ties broken by index).
Image top_k_mask(const Image& field, std::int64_t count) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(field.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return field.pixels[a] > field.pixels[b];
  });
  Image mask(field.height, field.width);
  for (std::int64_t i = 0; i < count; ++i) mask.pixels[order[i]] = 1.0f;
  return mask;
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

SceneSample synth_scene(const SceneConfig& config, Rng& rng) {
  config.validate();
  const std::int64_t s = config.size;
  const auto pixels = static_cast<double>(s * s);
  const auto [fmin, fmax] = config.mask_fraction_bounds;
  // Smoothing radius as a fraction of the scene side.
  const double sigma_lo = s / 14.0, sigma_hi = s / 7.0;

  SceneSample out;
  out.meta.stream_key = rng.key();
  bool accepted = false;
  for (int attempt = 1; attempt <= config.max_retries; ++attempt) {
    const double sigma = uniform_in(rng, sigma_lo, sigma_hi);
    const double target = uniform_in(rng, fmin, fmax);
    Image field = blob_field(s, sigma, rng);
    const auto count = static_cast<std::int64_t>(std::llround(target * pixels));
    Image mask = top_k_mask(field, count);
    const double fraction = static_cast<double>(count) / pixels;
    const int blobs = count_components(mask);
    if (fraction < fmin || fraction > fmax || blobs < config.blob_count_range.first ||
        blobs > config.blob_count_range.second) {
      continue;
    }
    out.mask = std::move(mask);
    out.meta.oil_fraction = fraction;
    out.meta.blob_count = blobs;
    out.meta.oil_smoothing = sigma;
    out.meta.attempts = attempt;
    accepted = true;
    break;
  }
  if (!accepted) {
    throw ValidationError("synth_scene: mask constraints unsatisfied after " +
                          std::to_string(config.max_retries) + " retries");
  }

  out.lookalike = Image(s, s);
  if (rng.uniform() < config.lookalike_prob) {
    const double sigma = uniform_in(rng, sigma_lo, sigma_hi);
    const double target = 0.5 * uniform_in(rng, fmin, fmax);
    Image field = blob_field(s, sigma, rng);
    Image patch = top_k_mask(field, static_cast<std::int64_t>(std::llround(target * pixels)));
    std::int64_t painted = 0;
    for (std::int64_t i = 0; i < patch.size(); ++i) {
      if (patch.pixels[i] != 0.0f && out.mask.pixels[i] == 0.0f) {
        out.lookalike.pixels[i] = 1.0f;
        ++painted;
      }
    }
    out.meta.has_lookalike = painted > 0;
    out.meta.lookalike_fraction = static_cast<double>(painted) / pixels;
    out.meta.lookalike_smoothing = sigma;
  }

  const ExponentialModel sea = ExponentialModel::from_mean(config.sea_mean);
  const ExponentialModel oil = ExponentialModel::from_mean(config.sea_mean / config.oil_contrast);
  const ExponentialModel dark =
      ExponentialModel::from_mean(config.sea_mean / config.lookalike_contrast);
  out.image = Image(s, s);
  for (std::int64_t i = 0; i < out.image.size(); ++i) {
    const ExponentialModel& region = out.mask.pixels[i] != 0.0f        ? oil
                                     : out.lookalike.pixels[i] != 0.0f ? dark
                                                                       : sea;
    out.image.pixels[i] = static_cast<float>(exp_quantile(rng.uniform(), region));
  }
  return out;
}

std::filesystem::path synth_dataset(const SceneConfig& config, std::int64_t count,
                                    const std::filesystem::path& out_dir) {
  config.validate();
  if (count < 0) throw ValidationError("synth_dataset: count must be >= 0");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (!ec) fs::create_directories(out_dir / "masks", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::ostringstream manifest, meta;
  meta.precision(9);
  meta << "# per-image intensity scale: stored = min(intensity / scale, 1)\n"
       << "size=" << config.size << "\n"
       << "sea_mean=" << config.sea_mean << "\n"
       << "oil_contrast=" << config.oil_contrast << "\n"
       << "lookalike_prob=" << config.lookalike_prob << "\n"
       << "lookalike_contrast=" << config.lookalike_contrast << "\n"
       << "seed=" << config.seed << "\n"
       << "count=" << count << "\n";

  const Rng root(config.seed);
  for (std::int64_t i = 0; i < count; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    SceneSample scene = synth_scene(config, rng);

    char name[32];
    std::snprintf(name, sizeof(name), "%05lld.pgm", static_cast<long long>(i));
    const std::string image_rel = std::string("images/") + name;
    const std::string mask_rel = std::string("masks/") + name;

    double scale = percentile(scene.image.pixels, 0.999);
    if (!(scale > 0.0)) scale = 1.0;
    Image stored(scene.image.height, scene.image.width);
    for (std::int64_t p = 0; p < stored.size(); ++p) {
      stored.pixels[p] = static_cast<float>(std::min(1.0, scene.image.pixels[p] / scale));
    }
    write_pgm(stored, out_dir / image_rel, 16);
    write_pgm(scene.mask, out_dir / mask_rel, 8);

    manifest << image_rel << '\t' << mask_rel << '\n';
    meta << "scale." << std::string(name, 5) << "=" << scale << "\n";
  }

  const fs::path manifest_path = out_dir / "manifest.tsv";
  for (const auto& [path, text] : {std::pair{manifest_path, manifest.str()},
                                   std::pair{out_dir / "meta.txt", meta.str()}}) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
  }
  return manifest_path;
}

}  // namespace dgnet
