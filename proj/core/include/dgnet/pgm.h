#ifndef DGNET_PGM_H_
#define DGNET_PGM_H_

#include <filesystem>
#include <string>

#include "dgnet/image.h"

namespace dgnet {

// Binary "P5" PGM, maxval 255 or 65535 (big-endian samples). Values are
// returned as sample / maxval.
Image read_pgm(const std::filesystem::path& path);
Image parse_pgm(const std::string& bytes);

// Quantizes round-half-up(v * maxval); v must lie in [0, 1].
void write_pgm(const Image& image, const std::filesystem::path& path,
               int bit_depth);
std::string encode_pgm(const Image& image, int bit_depth);

}  // namespace dgnet

#endif  // DGNET_PGM_H_
