#include "tvt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace tvt {

namespace {

constexpr char kMagic[8] = {'T', 'V', 'T', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw ConfigError("truncated checkpoint: " + path);
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw ConfigError("truncated checkpoint: " + path);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

struct ManifestEntry {
  std::string name;
  CheckpointDtype dtype;
  Shape shape;
};

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::string& path,
                     CheckpointDtype dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);

  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    out.put(static_cast<char>(dtype));
    put_u32(out, static_cast<std::uint32_t>(p->tensor.shape().size()));
    for (Index d : p->tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& p : params) {
    const auto& v = p->tensor.values();
    if (dtype == CheckpointDtype::f64) {
      for (Index i = 0; i < v.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(v(i)));
    } else {
      for (Index i = 0; i < v.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v(i)));
        put_u32(out, bits);
      }
    }
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

void load_checkpoint(ParameterStore& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ConfigError("malformed checkpoint magic in " + path);
  }
  const std::uint32_t count = get_u32(in, path);
  if (count != params.size()) {
    throw ConfigError("checkpoint " + path + " holds " + std::to_string(count) +
                      " tensors, model expects " + std::to_string(params.size()));
  }

  std::vector<ManifestEntry> manifest;
  manifest.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ManifestEntry entry;
    const std::uint32_t name_len = get_u32(in, path);
    entry.name.resize(name_len);
    if (!in.read(entry.name.data(), name_len)) {
      throw ConfigError("truncated checkpoint: " + path);
    }
    const int dtype = in.get();
    if (dtype != 0 && dtype != 1) {
      throw ConfigError("unknown dtype tag " + std::to_string(dtype) + " for '" +
                        entry.name + "' in " + path);
    }
    entry.dtype = static_cast<CheckpointDtype>(dtype);
    const std::uint32_t ndim = get_u32(in, path);
    entry.shape.resize(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) {
      entry.shape[d] = static_cast<Index>(get_u32(in, path));
    }
    if (!params.contains(entry.name)) {
      throw ConfigError("checkpoint tensor '" + entry.name + "' has no place in the model (" +
                        path + ")");
    }
    if (params.at(entry.name).tensor.shape() != entry.shape) {
      throw ConfigError("shape mismatch for '" + entry.name + "': checkpoint has " +
                        shape_to_string(entry.shape) + ", model has " +
                        shape_to_string(params.at(entry.name).tensor.shape()));
    }
    manifest.push_back(std::move(entry));
  }

  for (const ManifestEntry& entry : manifest) {
    auto& v = params.at(entry.name).tensor.values();
    if (entry.dtype == CheckpointDtype::f64) {
      for (Index i = 0; i < v.size(); ++i) v(i) = std::bit_cast<double>(get_u64(in, path));
    } else {
      for (Index i = 0; i < v.size(); ++i) {
        v(i) = static_cast<double>(std::bit_cast<float>(get_u32(in, path)));
      }
    }
    params.at(entry.name).tensor.drop_grad();
  }
}

}  // namespace tvt
