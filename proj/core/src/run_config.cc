#include "dgnet/run_config.h"

#include <fstream>
#include <sstream>

#include "dgnet/error.h"
#include "parse_util.h"

namespace dgnet {

using detail::parse_bool;
using detail::parse_number;

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys{
      "seed",           "size",          "count",          "sea_mean",
      "oil_contrast",   "blob_count_min", "blob_count_max", "lookalike_prob",
      "lookalike_contrast", "mask_fraction_min", "mask_fraction_max", "max_retries",
      "input_size",     "channels",      "latent_dim",     "family",
      "kl_weight",      "beta",          "leaky_slope",    "prior_scale",
      "prior_rate",     "epochs",        "batch_size",     "learning_rate",
      "curve_path",     "checkpoint_path", "alternating",  "threshold"};
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "seed") {
    scene.seed = train.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "size") {
    scene.size = model.input_size = parse_number<std::int64_t>(key, value);
  } else if (key == "count") {
    count = parse_number<std::int64_t>(key, value);
  } else if (key == "sea_mean") {
    scene.sea_mean = parse_number<double>(key, value);
  } else if (key == "oil_contrast") {
    scene.oil_contrast = parse_number<double>(key, value);
  } else if (key == "blob_count_min") {
    scene.blob_count_range.first = parse_number<int>(key, value);
  } else if (key == "blob_count_max") {
    scene.blob_count_range.second = parse_number<int>(key, value);
  } else if (key == "lookalike_prob") {
    scene.lookalike_prob = parse_number<double>(key, value);
  } else if (key == "lookalike_contrast") {
    scene.lookalike_contrast = parse_number<double>(key, value);
  } else if (key == "mask_fraction_min") {
    scene.mask_fraction_bounds.first = parse_number<double>(key, value);
  } else if (key == "mask_fraction_max") {
    scene.mask_fraction_bounds.second = parse_number<double>(key, value);
  } else if (key == "max_retries") {
    scene.max_retries = parse_number<int>(key, value);
  } else if (key == "input_size") {
    model.input_size = parse_number<std::int64_t>(key, value);
  } else if (key == "channels") {
    model.channels = detail::parse_int_list(key, value);
  } else if (key == "latent_dim") {
    model.latent_dim = parse_number<std::int64_t>(key, value);
  } else if (key == "family") {
    model.family = parse_family(value);
  } else if (key == "kl_weight" || key == "beta") {
    model.kl_weight = parse_number<float>(key, value);
  } else if (key == "leaky_slope") {
    model.leaky_slope = parse_number<float>(key, value);
  } else if (key == "prior_scale") {
    model.prior_scale = parse_number<float>(key, value);
  } else if (key == "prior_rate") {
    model.prior_rate = parse_number<float>(key, value);
  } else if (key == "epochs") {
    train.epochs = parse_number<std::int64_t>(key, value);
  } else if (key == "batch_size") {
    train.batch_size = parse_number<std::int64_t>(key, value);
  } else if (key == "learning_rate") {
    train.learning_rate = parse_number<double>(key, value);
  } else if (key == "curve_path") {
    train.curve_path = std::string(value);
  } else if (key == "checkpoint_path") {
    train.checkpoint_path = std::string(value);
  } else if (key == "alternating") {
    train.alternating = parse_bool(key, value);
  } else if (key == "threshold") {
    threshold = parse_number<float>(key, value);
  } else {
    throw ValidationError("unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::validate() const {
  scene.validate();
  model.validate();
  train.validate();
  if (count < 0) throw ValidationError("count must be >= 0");
  if (!(threshold >= 0.0f && threshold <= 1.0f)) {
    throw ValidationError("threshold must lie in [0, 1]");
  }
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      base.set(detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::move(base));
}

}  // namespace dgnet
