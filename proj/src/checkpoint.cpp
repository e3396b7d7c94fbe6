#include "tamperwatch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tamperwatch/errors.hpp"

namespace tamperwatch {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

Eigen::Index dim_product(const std::vector<std::uint32_t>& dims) {
  Eigen::Index n = 1;
  for (const auto d : dims) n *= static_cast<Eigen::Index>(d);
  return n;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointArrayRef>& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  os.write(kCheckpointMagic, 4);
  os.put(static_cast<char>(kCheckpointVersion));
  put_u32(os, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [dims, data] : arrays) {
    if (dim_product(dims) != data->size()) {
      throw InternalError("save_checkpoint: declared shape does not match array length");
    }
    os.put(static_cast<char>(dims.size()));
    for (const auto d : dims) put_u32(os, d);
  }
  for (const auto& [dims, data] : arrays) {
    for (Eigen::Index i = 0; i < data->size(); ++i) put_f64(os, (*data)[i]);
  }
  if (!os) {
    throw IoError("write failure on checkpoint: " + path.string());
  }
}

std::vector<CheckpointArray> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw IngestError("not a CLTM checkpoint: " + path.string());
  }
  const int version = is.get();
  if (version != kCheckpointVersion) {
    throw IngestError("unsupported checkpoint version " + std::to_string(version) + ": " +
                      path.string());
  }
  const std::uint32_t count = get_u32(is);
  std::vector<CheckpointArray> arrays(count);
  for (auto& a : arrays) {
    const int ndim = is.get();
    if (ndim < 0 || ndim > 8) {
      throw IngestError("corrupt checkpoint manifest: " + path.string());
    }
    a.dims.resize(static_cast<std::size_t>(ndim));
    for (auto& d : a.dims) d = get_u32(is);
  }
  for (auto& a : arrays) {
    a.data.resize(dim_product(a.dims));
    for (Eigen::Index i = 0; i < a.data.size(); ++i) a.data[i] = get_f64(is);
  }
  if (!is) {
    throw IngestError("truncated checkpoint: " + path.string());
  }
  return arrays;
}

}  // namespace tamperwatch
