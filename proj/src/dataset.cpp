#include "survmoe/dataset.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "survmoe/warp.hpp"

namespace survmoe::data {

int FeatureSchema::embedding_dim(int col) const {
  const int card = cardinality(col);
  return std::min(16, (card + 1) / 2);
}

int FeatureSchema::missing_level(int col) const {
  const int idx = level_index(col, "missing");
  assert(idx >= 0);
  return idx;
}

int FeatureSchema::level_index(int col, const std::string& token) const {
  const auto& vocab = vocabularies[col];
  const auto it = std::find(vocab.begin(), vocab.end(), token);
  return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
}

TimeGrid TimeGrid::fit(const Dataset& train, int m) {
  if (m < 2) throw std::invalid_argument("time grid needs at least 2 bins");
  if (train.size() == 0) throw std::invalid_argument("cannot fit a time grid on an empty dataset");
  double t_max = 0.0;
  for (const auto& r : train.records) t_max = std::max(t_max, r.time);
  if (!(t_max > 0.0)) throw std::invalid_argument("training times must be positive");
  TimeGrid g;
  g.m = m;
  g.edges = Vec(m + 1);
  for (int j = 0; j <= m; ++j) g.edges[j] = t_max * j / m;
  return g;
}

int TimeGrid::bin_index(double t) const {
  const double* begin = edges.data();
  const double* end = begin + edges.size();
  int j = static_cast<int>(std::upper_bound(begin, end, t) - begin) - 1;
  return std::clamp(j, 0, m - 1);
}

Vec TimeGrid::canonical_points() const { return warp::canonical_grid(m); }

std::vector<EncodedTarget> discretize(const Dataset& ds, const TimeGrid& grid) {
  std::vector<EncodedTarget> out;
  out.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    EncodedTarget t;
    t.bin_index = grid.bin_index(r.time);
    t.event = r.event;
    t.monotone_labels.assign(grid.m, 0);
    for (int j = t.bin_index; j < grid.m; ++j) t.monotone_labels[j] = 1;
    out.push_back(std::move(t));
  }
  return out;
}

FeatureSchema fit_standardizer(const Dataset& train, FeatureSchema schema) {
  const int d = static_cast<int>(schema.continuous_names.size());
  schema.continuous_stats.assign(d, {});
  for (int c = 0; c < d; ++c) {
    double sum = 0.0;
    long count = 0;
    for (const auto& r : train.records) {
      const double v = r.continuous[c];
      if (std::isfinite(v)) {
        sum += v;
        ++count;
      }
    }
    const double mean = count > 0 ? sum / count : 0.0;
    double ss = 0.0;
    for (const auto& r : train.records) {
      const double v = r.continuous[c];
      if (std::isfinite(v)) ss += (v - mean) * (v - mean);
    }
    double std_dev = count > 0 ? std::sqrt(ss / count) : 0.0;
    if (!(std_dev > 0.0)) std_dev = 1.0;
    schema.continuous_stats[c] = {mean, std_dev};
  }
  return schema;
}

Dataset apply_standardizer(const FeatureSchema& schema, Dataset ds) {
  const int d = static_cast<int>(schema.continuous_stats.size());
  if (d != static_cast<int>(schema.continuous_names.size()))
    throw std::invalid_argument("schema has no fitted standardizer");
  for (auto& r : ds.records) {
    assert(r.continuous.size() == d);
    for (int c = 0; c < d; ++c) {
      const double v = r.continuous[c];
      const auto& st = schema.continuous_stats[c];
      r.continuous[c] = std::isfinite(v) ? (v - st.mean) / st.std : 0.0;
    }
  }
  return ds;
}

Splits split(const Dataset& ds, double f_train, double f_val, double f_test,
             std::uint64_t seed) {
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  const int n = ds.size();
  const int n_train = static_cast<int>(std::floor(f_train * n + 1e-9));
  const int n_val = static_cast<int>(std::floor(f_val * n + 1e-9));
  const int n_test = n - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("split produced an empty part");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  Splits out;
  auto take = [&](int begin, int count) {
    Dataset part;
    part.records.reserve(count);
    for (int i = begin; i < begin + count; ++i) {
      part.records.push_back(ds.records[idx[i]]);
      if (ds.has_labels()) part.class_labels.push_back(ds.class_labels[idx[i]]);
      if (!ds.raw_event_times.empty())
        part.raw_event_times.push_back(ds.raw_event_times[idx[i]]);
    }
    return part;
  };
  out.train = take(0, n_train);
  out.val = take(n_train, n_val);
  out.test = take(n_train + n_val, n_test);
  return out;
}

}  // namespace survmoe::data
