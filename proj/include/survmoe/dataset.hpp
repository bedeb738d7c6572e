#pragma once

// Dataset representation: survival records, fitted feature schema, equal-width
// time grid, monotone target encoding, and deterministic splitting.

#include <cstdint>
#include <string>
#include <vector>

#include "survmoe/common.hpp"

namespace survmoe::data {

struct SurvivalRecord {
  Vec continuous;                // standardized units after apply_standardizer
  std::vector<int> categorical;  // level index per categorical column
  double time = 0.0;             // observed time, > 0
  int event = 0;                 // 1 = event observed, 0 = right-censored
};

/// Column roles as declared by the user (JSON file or built in code).
struct SchemaDecl {
  std::string time_col;
  std::string event_col;
  std::vector<std::string> continuous;
  std::vector<std::string> categorical;
};

struct ContinuousStat {
  double mean = 0.0;
  double std = 1.0;
};

/// Fitted feature metadata: per-column vocabularies for categorical features
/// plus standardization statistics for continuous ones.
struct FeatureSchema {
  std::string time_col;
  std::string event_col;
  std::vector<std::string> continuous_names;
  std::vector<ContinuousStat> continuous_stats;  // empty until fit_standardizer
  std::vector<std::string> categorical_names;
  std::vector<std::vector<std::string>> vocabularies;  // "missing" always a level

  int cardinality(int col) const { return static_cast<int>(vocabularies[col].size()); }
  int embedding_dim(int col) const;
  int missing_level(int col) const;
  /// Index of token in the column vocabulary, -1 if unknown.
  int level_index(int col, const std::string& token) const;
  bool standardized() const { return !continuous_stats.empty(); }
};

struct Dataset {
  std::vector<SurvivalRecord> records;
  std::vector<int> class_labels;        // ground truth when known (synthetic)
  std::vector<double> raw_event_times;  // uncensored T* when known (synthetic)

  int size() const { return static_cast<int>(records.size()); }
  bool has_labels() const { return !class_labels.empty(); }
};

/// Equal-width discretization of [0, max training time] into m bins.
struct TimeGrid {
  int m = 0;
  Vec edges;  // m+1 ascending, edges[0] = 0

  static TimeGrid fit(const Dataset& train, int m);
  /// Largest j with edges[j] <= t, clamped to [0, m-1].
  int bin_index(double t) const;
  /// Unitless grid j/(m-1) on [0, 1].
  Vec canonical_points() const;
};

struct EncodedTarget {
  int bin_index = 0;
  std::vector<int> monotone_labels;  // zeros before bin_index, ones from it on
  int event = 0;
};

std::vector<EncodedTarget> discretize(const Dataset& ds, const TimeGrid& grid);

/// Fills continuous_stats from the training split. Means/stds are computed
/// over non-missing entries; a constant column gets std 1.
FeatureSchema fit_standardizer(const Dataset& train, FeatureSchema schema);

/// (x - mean) / std per continuous column; missing values become 0.
Dataset apply_standardizer(const FeatureSchema& schema, Dataset ds);

struct Splits {
  Dataset train, val, test;
};

/// Seed-deterministic disjoint partition. Fractions must sum to 1 and every
/// part must be non-empty.
Splits split(const Dataset& ds, double f_train, double f_val, double f_test,
             std::uint64_t seed);

}  // namespace survmoe::data
