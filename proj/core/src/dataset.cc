#include "dgnet/dataset.h"

#include <fstream>

#include "dgnet/error.h"
#include "dgnet/pgm.h"

namespace dgnet {

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    ManifestEntry e;
    e.image = line.substr(0, tab);
    if (tab != std::string::npos) {
      e.mask = line.substr(tab + 1);
      if (e.mask.find('\t') != std::string::npos) {
        throw IoError(manifest_path.string() + ":" + std::to_string(line_no) +
                      ": expected at most two tab-separated columns");
      }
    }
    if (e.image.empty()) {
      throw IoError(manifest_path.string() + ":" + std::to_string(line_no) +
                    ": empty image path");
    }
    entries.push_back(std::move(e));
  }
  if (in.bad()) throw IoError("read failed: " + manifest_path.string());
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& manifest_path) {
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot open " + manifest_path.string() + " for writing");
  for (const ManifestEntry& e : entries) {
    out << e.image;
    if (!e.mask.empty()) out << '\t' << e.mask;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + manifest_path.string());
}

Image load_image(const std::filesystem::path& path, std::int64_t input_size) {
  if (input_size < 1) throw ValidationError("input size must be positive");
  Image img = read_pgm(path);
  if (img.empty()) throw IoError(path.string() + ": zero-size image");
  return resize_bilinear(img, input_size, input_size);
}

std::vector<SceneSample> load_dataset(const std::filesystem::path& manifest_path,
                                      std::int64_t input_size) {
  if (input_size < 1) throw ValidationError("input size must be positive");
  const auto entries = read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  std::vector<SceneSample> out;
  out.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    if (e.mask.empty()) {
      throw IoError(manifest_path.string() + ": no mask listed for " + e.image);
    }
    SceneSample s;
    s.image = load_image(root / e.image, input_size);
    Image mask = read_pgm(root / e.mask);
    if (mask.empty()) throw IoError((root / e.mask).string() + ": zero-size image");
    s.mask = threshold(resize_nearest(mask, input_size, input_size), 0.5f);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dgnet
