#ifndef DGNET_CHECKPOINT_H_
#define DGNET_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "dgnet/model.h"

namespace dgnet {

inline constexpr char kCheckpointMagic[4] = {'D', 'G', 'N', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers 32-bit little-endian:
//   "DGNT" | version | config length | config text (key=value lines)
//   | tensor count | per tensor: name length, name, rank, dims, float32 data
// Tensors are the parameters in DgNet::parameters() order followed by every
// batch-norm layer's `<name>.running_mean` and `<name>.running_var`.
std::string encode_checkpoint(const DgNet& model);
DgNet decode_checkpoint(const std::string& bytes);

void save_checkpoint(const DgNet& model, const std::filesystem::path& path);
DgNet load_checkpoint(const std::filesystem::path& path);

// key=value text of the architecture-defining fields.
std::string model_config_text(const ModelConfig& config);
ModelConfig parse_model_config_text(const std::string& text);

}  // namespace dgnet

#endif  // DGNET_CHECKPOINT_H_
