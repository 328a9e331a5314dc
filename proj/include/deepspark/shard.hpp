#pragma once

#include <cstdint>
#include <string>

#include "deepspark/dataset.hpp"

namespace deepspark {

// DSHD: the on-disk shard format workers train from.
//
//   header (28 bytes, little-endian):
//     u32 magic 0x44534844, u32 version=1, u32 n_samples,
//     u32 n_features, u32 n_classes, u64 seed
//   body: n_samples x (n_features x f32 features, u32 label)
namespace dshd {
constexpr uint32_t kMagic = 0x44534844;
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderSize = 28;

// Expected total file size for a given header.
uint64_t file_size(uint32_t n_samples, uint32_t n_features);
}  // namespace dshd

struct ShardData {
  Dataset data;
  uint64_t seed = 0;  // provenance: the seed of the partition that produced it
};

// Writes atomically enough for local use: on failure the partial file is removed.
void write_shard(const Dataset& shard, const std::string& path, uint64_t seed);

// Validates magic, version, header arithmetic against the actual file length,
// and label ranges. Throws FormatError on any violation.
ShardData read_shard(const std::string& path);

}  // namespace deepspark
