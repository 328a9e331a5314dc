#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace deepspark {

// Row-major sample container. Labels are class indices in [0, n_classes).
struct Dataset {
  uint32_t n_features = 0;
  uint32_t n_classes = 0;
  std::vector<float> features;  // n_samples * n_features
  std::vector<uint32_t> labels;

  size_t size() const { return labels.size(); }
  std::span<const float> row(size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
  void validate() const;
};

struct SyntheticSpec {
  uint32_t n_samples = 2000;
  uint32_t n_features = 20;
  uint32_t n_classes = 2;
  double class_separation = 10.0;
  double noise_sigma = 0.5;
  uint64_t seed = 0;
};

// Gaussian blobs around seeded centroids with pairwise distance at least
// class_separation. Classes are balanced to within one sample. Throws
// ContractError if no centroid placement is found in 1000 attempts.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Rows of `label,f1,...,fk`. n_classes = max(label)+1. Malformed rows raise
// ParseError carrying the 1-based line number.
Dataset load_csv(const std::string& path);

void write_csv(const Dataset& ds, const std::string& path);

// Seeded shuffle followed by a contiguous split; shard sizes differ by at
// most one and every sample lands in exactly one shard.
std::vector<Dataset> partition(const Dataset& ds, uint32_t n, uint64_t seed);

// Seeded (train, holdout) split; holdout_frac of the samples go to the holdout.
std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double holdout_frac, uint64_t seed);

}  // namespace deepspark
