#ifndef DGNET_RUN_CONFIG_H_
#define DGNET_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dgnet/model.h"
#include "dgnet/speckle.h"
#include "dgnet/trainer.h"

namespace dgnet {

// Everything a run can be configured with. `seed` and `size` feed both the
// scene generator and the model/trainer.
struct RunConfig {
  SceneConfig scene;
  ModelConfig model;
  TrainConfig train;
  std::int64_t count = 0;
  float threshold = 0.5f;

  // Sets one field from its textual value; throws ValidationError on an
  // unknown key or unparseable value.
  void set(std::string_view key, std::string_view value);
  void validate() const;
};

// Keys accepted by RunConfig::set, in documentation order.
const std::vector<std::string>& run_config_keys();

// `key = value` lines, `#` starts a comment, blank lines ignored. Values are
// applied on top of `base` and the result is validated.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace dgnet

#endif  // DGNET_RUN_CONFIG_H_
