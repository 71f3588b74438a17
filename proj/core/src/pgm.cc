#include "dgnet/pgm.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dgnet/error.h"

namespace dgnet {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const unsigned char c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() &&
         !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') {
    ++pos;
  }
  if (start == pos) throw IoError("malformed PGM header: unexpected end of data");
  return bytes.substr(start, pos - start);
}

long parse_header_int(const std::string& token) {
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw IoError("malformed PGM header: bad number '" + token + "'");
    }
  }
  if (token.size() > 9) throw IoError("malformed PGM header: number too large");
  return std::stol(token);
}

}  // namespace

Image parse_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") {
    throw IoError("malformed PGM header: expected magic P5");
  }
  const long width = parse_header_int(next_token(bytes, pos));
  const long height = parse_header_int(next_token(bytes, pos));
  const long maxval = parse_header_int(next_token(bytes, pos));
  if (width <= 0 || height <= 0) throw IoError("malformed PGM header: zero size");
  if (maxval != 255 && maxval != 65535) {
    throw IoError("unsupported PGM maxval " + std::to_string(maxval));
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw IoError("malformed PGM header: missing raster separator");
  }
  ++pos;
  const std::size_t bytes_per_sample = maxval == 255 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n * bytes_per_sample) {
    throw IoError("truncated PGM payload");
  }
  Image image(height, width);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  const float denom = static_cast<float>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes_per_sample == 1
                           ? raw[i]
                           : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    image.pixels[i] = static_cast<float>(v) / denom;
  }
  return image;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_pgm(buf.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw ValidationError("PGM bit depth must be 8 or 16");
  }
  if (image.empty()) throw ValidationError("cannot encode an empty image");
  const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
  out.reserve(out.size() + image.pixels.size() * (bit_depth / 8));
  for (float v : image.pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValidationError("PGM values must lie in [0, 1]");
    }
    const auto q = static_cast<unsigned>(std::floor(static_cast<double>(v) * maxval + 0.5));
    if (bit_depth == 8) {
      out.push_back(static_cast<char>(q));
    } else {
      out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xFF));
    }
  }
  return out;
}

void write_pgm(const Image& image, const std::filesystem::path& path, int bit_depth) {
  const std::string bytes = encode_pgm(image, bit_depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dgnet
