#ifndef DGNET_DATASET_H_
#define DGNET_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgnet/speckle.h"

namespace dgnet {

struct ManifestEntry {
  std::string image;  // relative to the manifest directory
  std::string mask;   // empty for unlabeled lines
};

// One `image<TAB>mask` (or bare `image`) per line; blank lines are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& manifest_path);

// Loads every pair, resampling images bilinearly and masks by nearest
// neighbour (then re-binarised at 0.5) to input_size square. Every line must
// name a mask.
std::vector<SceneSample> load_dataset(const std::filesystem::path& manifest_path,
                                      std::int64_t input_size);

// Image only, resampled bilinearly when its size differs.
Image load_image(const std::filesystem::path& path, std::int64_t input_size);

}  // namespace dgnet

#endif  // DGNET_DATASET_H_
