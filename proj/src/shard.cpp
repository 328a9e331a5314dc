#include "deepspark/shard.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "deepspark/errors.hpp"

namespace deepspark {

namespace {

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(static_cast<uint8_t>(v));
  buf.push_back(static_cast<uint8_t>(v >> 8));
  buf.push_back(static_cast<uint8_t>(v >> 16));
  buf.push_back(static_cast<uint8_t>(v >> 24));
}

void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
  put_u32(buf, static_cast<uint32_t>(v));
  put_u32(buf, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint64_t get_u64(const uint8_t* p) {
  return static_cast<uint64_t>(get_u32(p)) | static_cast<uint64_t>(get_u32(p + 4)) << 32;
}

}  // namespace

namespace dshd {
uint64_t file_size(uint32_t n_samples, uint32_t n_features) {
  return kHeaderSize +
         static_cast<uint64_t>(n_samples) * (4ull * n_features + 4ull);
}
}  // namespace dshd

void write_shard(const Dataset& shard, const std::string& path, uint64_t seed) {
  shard.validate();

  std::vector<uint8_t> buf;
  buf.reserve(dshd::file_size(static_cast<uint32_t>(shard.size()), shard.n_features));
  put_u32(buf, dshd::kMagic);
  put_u32(buf, dshd::kVersion);
  put_u32(buf, static_cast<uint32_t>(shard.size()));
  put_u32(buf, shard.n_features);
  put_u32(buf, shard.n_classes);
  put_u64(buf, seed);
  for (size_t i = 0; i < shard.size(); ++i) {
    const auto row = shard.row(i);
    for (float v : row) put_u32(buf, std::bit_cast<uint32_t>(v));
    put_u32(buf, shard.labels[i]);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) {
    out.close();
    std::error_code ec;
    std::filesystem::remove(path, ec);
    throw IoError("write failed for " + path + " (partial file removed)");
  }
}

ShardData read_shard(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path);

  if (buf.size() < dshd::kHeaderSize) throw FormatError(path + ": truncated header");
  const uint8_t* p = buf.data();
  if (get_u32(p) != dshd::kMagic) throw FormatError(path + ": bad magic");
  if (get_u32(p + 4) != dshd::kVersion) throw FormatError(path + ": unsupported version");
  const uint32_t n_samples = get_u32(p + 8);
  const uint32_t n_features = get_u32(p + 12);
  const uint32_t n_classes = get_u32(p + 16);
  const uint64_t seed = get_u64(p + 20);

  if (n_samples == 0) throw FormatError(path + ": empty shard");
  if (n_features == 0 || n_classes == 0) throw FormatError(path + ": zero dimension");
  // Guard the size arithmetic before trusting it.
  if (n_features > (UINT64_MAX - 4) / 4 ||
      n_samples > UINT64_MAX / (4ull * n_features + 4ull)) {
    throw FormatError(path + ": dimension overflow");
  }
  const uint64_t want = dshd::file_size(n_samples, n_features);
  if (buf.size() != want) {
    throw FormatError(path + ": size mismatch (header implies " + std::to_string(want) +
                      " bytes, file has " + std::to_string(buf.size()) + ")");
  }

  ShardData out;
  out.seed = seed;
  out.data.n_features = n_features;
  out.data.n_classes = n_classes;
  out.data.features.resize(static_cast<size_t>(n_samples) * n_features);
  out.data.labels.resize(n_samples);
  p += dshd::kHeaderSize;
  for (uint32_t i = 0; i < n_samples; ++i) {
    for (uint32_t j = 0; j < n_features; ++j) {
      out.data.features[static_cast<size_t>(i) * n_features + j] =
          std::bit_cast<float>(get_u32(p));
      p += 4;
    }
    const uint32_t label = get_u32(p);
    p += 4;
    if (label >= n_classes) {
      throw FormatError(path + ": label " + std::to_string(label) + " out of range at sample " +
                        std::to_string(i));
    }
    out.data.labels[i] = label;
  }
  return out;
}

}  // namespace deepspark
