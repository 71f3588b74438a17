#include "dgnet/checkpoint.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "dgnet/error.h"
#include "parse_util.h"

namespace dgnet {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_tensor(std::string& out, const std::string& name, const Shape& shape,
                std::span<const float> values) {
  put_string(out, name);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::int64_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw IoError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  Shape shape;
  std::vector<float> values;
};

void copy_into(const std::string& name, std::map<std::string, StoredTensor>& stored,
               const Shape& expected, std::span<float> dst) {
  auto it = stored.find(name);
  if (it == stored.end()) throw IoError("checkpoint is missing tensor " + name);
  if (it->second.shape != expected) {
    throw IoError("checkpoint tensor " + name + " has shape " + shape_str(it->second.shape) +
                  ", architecture expects " + shape_str(expected));
  }
  std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  stored.erase(it);
}

}  // namespace

std::string model_config_text(const ModelConfig& c) {
  std::string channels;
  for (std::size_t i = 0; i < c.channels.size(); ++i) {
    if (i > 0) channels += ',';
    channels += std::to_string(c.channels[i]);
  }
  std::string out;
  out += "family=" + family_name(c.family) + "\n";
  out += "input_size=" + std::to_string(c.input_size) + "\n";
  out += "channels=" + channels + "\n";
  out += "latent_dim=" + std::to_string(c.latent_dim) + "\n";
  out += "kl_weight=" + detail::format_g9(c.kl_weight) + "\n";
  out += "leaky_slope=" + detail::format_g9(c.leaky_slope) + "\n";
  out += "prior_scale=" + detail::format_g9(c.prior_scale) + "\n";
  out += "prior_rate=" + detail::format_g9(c.prior_rate) + "\n";
  return out;
}

ModelConfig parse_model_config_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint config line without '=': " + line);
    const std::string key(detail::trim(std::string_view(line).substr(0, eq)));
    const std::string_view value = detail::trim(std::string_view(line).substr(eq + 1));
    try {
      if (key == "family") c.family = parse_family(value);
      else if (key == "input_size") c.input_size = detail::parse_number<std::int64_t>(key, value);
      else if (key == "channels") c.channels = detail::parse_int_list(key, value);
      else if (key == "latent_dim") c.latent_dim = detail::parse_number<std::int64_t>(key, value);
      else if (key == "kl_weight") c.kl_weight = detail::parse_number<float>(key, value);
      else if (key == "leaky_slope") c.leaky_slope = detail::parse_number<float>(key, value);
      else if (key == "prior_scale") c.prior_scale = detail::parse_number<float>(key, value);
      else if (key == "prior_rate") c.prior_rate = detail::parse_number<float>(key, value);
      else throw IoError("checkpoint config has unknown key " + key);
    } catch (const ValidationError& e) {
      throw IoError(std::string("checkpoint config: ") + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw IoError(std::string("checkpoint config: ") + e.what());
  }
  return c;
}

std::string encode_checkpoint(const DgNet& model) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_string(out, model_config_text(model.config()));
  const auto params = model.parameters();
  const auto stats = model.snapshot_stats();
  const auto stat_names = model.batchnorm_names();
  put_u32(out, static_cast<std::uint32_t>(params.size() + 2 * stats.size()));
  for (const NamedTensor& p : params) {
    put_tensor(out, p.name, p.tensor.shape(), p.tensor.data());
  }
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const Shape shape{static_cast<std::int64_t>(stats[i].running_mean.size())};
    put_tensor(out, stat_names[i] + ".running_mean", shape, stats[i].running_mean);
    put_tensor(out, stat_names[i] + ".running_var", shape, stats[i].running_var);
  }
  return out;
}

DgNet decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != std::string(kCheckpointMagic, 4)) {
    throw IoError("not a DGNT checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t config_len = r.u32("config length");
  const ModelConfig config = parse_model_config_text(r.str(config_len, "config"));

  std::map<std::string, StoredTensor> stored;
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.u32("name length"), "name");
    StoredTensor st;
    const std::uint32_t rank = r.u32("rank");
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      st.shape.push_back(r.u32("dimension"));
      numel *= st.shape.back();
      if (numel > bytes.size()) throw IoError("checkpoint tensor " + name + " is truncated");
    }
    st.values.resize(numel);
    for (float& f : st.values) {
      const std::uint32_t bits = r.u32("tensor data");
      std::memcpy(&f, &bits, 4);
    }
    if (!stored.emplace(name, std::move(st)).second) {
      throw IoError("checkpoint holds tensor " + name + " twice");
    }
  }
  if (!r.done()) throw IoError("checkpoint has trailing bytes");

  DgNet model(config, Rng(0));
  for (const NamedTensor& p : model.parameters()) {
    Tensor t = p.tensor;
    copy_into(p.name, stored, t.shape(), t.mutable_data());
  }
  for (auto& [name, stats] : model.batchnorm_stats()) {
    const Shape shape{static_cast<std::int64_t>(stats->running_mean.size())};
    copy_into(name + ".running_mean", stored, shape, stats->running_mean);
    copy_into(name + ".running_var", stored, shape, stats->running_var);
  }
  if (!stored.empty()) {
    throw IoError("checkpoint holds unexpected tensor " + stored.begin()->first);
  }
  return model;
}

void save_checkpoint(const DgNet& model, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

DgNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace dgnet
