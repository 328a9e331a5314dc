#include "deepspark/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "deepspark/errors.hpp"
#include "deepspark/rng.hpp"

namespace deepspark {

void Dataset::validate() const {
  if (n_features == 0) throw ContractError("dataset: n_features must be positive");
  if (n_classes == 0) throw ContractError("dataset: n_classes must be positive");
  if (labels.empty()) throw ContractError("dataset: no samples");
  if (features.size() != labels.size() * static_cast<size_t>(n_features)) {
    throw ContractError("dataset: feature matrix shape does not match label count");
  }
  for (uint32_t y : labels) {
    if (y >= n_classes) throw ContractError("dataset: label out of range");
  }
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n_samples == 0) throw ContractError("gen_synthetic: n_samples must be positive");
  if (spec.n_features == 0) throw ContractError("gen_synthetic: n_features must be positive");
  if (spec.n_classes < 2) throw ContractError("gen_synthetic: n_classes must be at least 2");
  if (!(spec.class_separation > 0.0)) {
    throw ContractError("gen_synthetic: class_separation must be positive");
  }
  if (spec.noise_sigma < 0.0) throw ContractError("gen_synthetic: noise_sigma must be nonnegative");

  Rng rng(mix_seed(spec.seed, 0xda7a5e7));

  // Centroid placement: rejection-sample until all pairwise distances clear
  // the separation, up to 1000 attempts.
  const double spread = 1.5 * spec.class_separation;
  std::vector<double> centroids;
  bool placed = false;
  for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
    centroids.assign(static_cast<size_t>(spec.n_classes) * spec.n_features, 0.0);
    for (double& c : centroids) c = spread * rng.normal();
    placed = true;
    for (uint32_t a = 0; a < spec.n_classes && placed; ++a) {
      for (uint32_t b = a + 1; b < spec.n_classes; ++b) {
        double d2 = 0.0;
        for (uint32_t j = 0; j < spec.n_features; ++j) {
          const double diff = centroids[a * spec.n_features + j] - centroids[b * spec.n_features + j];
          d2 += diff * diff;
        }
        if (d2 < spec.class_separation * spec.class_separation) {
          placed = false;
          break;
        }
      }
    }
  }
  if (!placed) {
    throw ContractError("gen_synthetic: could not place centroids at the requested separation");
  }

  Dataset ds;
  ds.n_features = spec.n_features;
  ds.n_classes = spec.n_classes;
  ds.features.resize(static_cast<size_t>(spec.n_samples) * spec.n_features);
  ds.labels.resize(spec.n_samples);
  for (uint32_t i = 0; i < spec.n_samples; ++i) {
    const uint32_t cls = i % spec.n_classes;  // balanced to within one
    ds.labels[i] = cls;
    for (uint32_t j = 0; j < spec.n_features; ++j) {
      const double v = centroids[cls * spec.n_features + j] + spec.noise_sigma * rng.normal();
      ds.features[static_cast<size_t>(i) * spec.n_features + j] = static_cast<float>(v);
    }
  }
  return ds;
}

namespace {

double parse_number(const std::string& cell, size_t line_no) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  double v = 0.0;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ParseError(line_no, "non-numeric cell '" + cell + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  Dataset ds;
  std::string line;
  size_t line_no = 0;
  size_t expected_cols = 0;
  uint32_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;

    std::vector<std::string> cells;
    std::stringstream ss(stripped);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!stripped.empty() && stripped.back() == ',') cells.push_back("");

    if (cells.size() < 2) throw ParseError(line_no, "expected `label,f1,...,fk`");
    if (expected_cols == 0) {
      expected_cols = cells.size();
    } else if (cells.size() != expected_cols) {
      throw ParseError(line_no, "expected " + std::to_string(expected_cols) + " columns, got " +
                                    std::to_string(cells.size()));
    }

    const double label_v = parse_number(cells[0], line_no);
    if (label_v < 0.0 || label_v != std::floor(label_v)) {
      throw ParseError(line_no, "label must be a nonnegative integer");
    }
    const uint32_t label = static_cast<uint32_t>(label_v);
    max_label = std::max(max_label, label);
    ds.labels.push_back(label);
    for (size_t c = 1; c < cells.size(); ++c) {
      ds.features.push_back(static_cast<float>(parse_number(cells[c], line_no)));
    }
  }
  if (ds.labels.empty()) throw ParseError(line_no == 0 ? 1 : line_no, "empty file");
  ds.n_features = static_cast<uint32_t>(expected_cols - 1);
  ds.n_classes = max_label + 1;
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[64];
  for (size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    const auto row = ds.row(i);
    for (float v : row) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Dataset> partition(const Dataset& ds, uint32_t n, uint64_t seed) {
  ds.validate();
  if (n == 0) throw ContractError("partition: n must be positive");
  if (n > ds.size()) throw ContractError("partition: more shards than samples");

  std::vector<uint32_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(mix_seed(seed, 0x5a4d));
  rng.shuffle(order);

  const size_t base = ds.size() / n;
  const size_t extra = ds.size() % n;
  std::vector<Dataset> shards(n);
  size_t pos = 0;
  for (uint32_t k = 0; k < n; ++k) {
    const size_t count = base + (k < extra ? 1 : 0);
    Dataset& sh = shards[k];
    sh.n_features = ds.n_features;
    sh.n_classes = ds.n_classes;
    sh.labels.reserve(count);
    sh.features.reserve(count * ds.n_features);
    for (size_t i = 0; i < count; ++i, ++pos) {
      const uint32_t src = order[pos];
      sh.labels.push_back(ds.labels[src]);
      const auto row = ds.row(src);
      sh.features.insert(sh.features.end(), row.begin(), row.end());
    }
  }
  return shards;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double holdout_frac, uint64_t seed) {
  ds.validate();
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) {
    throw ContractError("split_holdout: fraction must lie in (0,1)");
  }
  std::vector<uint32_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(mix_seed(seed, 0x401d));
  rng.shuffle(order);

  const size_t n_holdout = std::max<size_t>(1, static_cast<size_t>(ds.size() * holdout_frac));
  if (n_holdout >= ds.size()) throw ContractError("split_holdout: nothing left for training");

  Dataset train, holdout;
  for (Dataset* part : {&train, &holdout}) {
    part->n_features = ds.n_features;
    part->n_classes = ds.n_classes;
  }
  for (size_t i = 0; i < ds.size(); ++i) {
    Dataset& dst = (i < n_holdout) ? holdout : train;
    const uint32_t src = order[i];
    dst.labels.push_back(ds.labels[src]);
    const auto row = ds.row(src);
    dst.features.insert(dst.features.end(), row.begin(), row.end());
  }
  return {std::move(train), std::move(holdout)};
}

}  // namespace deepspark
