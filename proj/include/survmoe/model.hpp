#pragma once

// Full survival model: embedding + fully-connected ReLU backbone feeding one
// of the prediction heads, with named parameter blocks and JSON checkpoints.

#include <cstdint>
#include <string>
#include <vector>

#include "survmoe/autodiff.hpp"
#include "survmoe/common.hpp"
#include "survmoe/dataset.hpp"
#include "survmoe/heads.hpp"

namespace survmoe::model {

enum class HeadKind { kFixed, kAdjustable, kPersonalized, kLinearMtlr };

HeadKind head_from_string(const std::string& s);
std::string head_to_string(HeadKind k);

struct ModelConfig {
  HeadKind head = HeadKind::kFixed;
  int experts = 10;      // ignored by the linear head
  int hidden_dim = 120;
  int layers = 1;
  int bins = 100;
  double kappa_init = 2.0;
};

/// Named parameter blocks in creation order; the index doubles as the
/// gradient slot on the tape.
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Mat> values;

  int add(const std::string& name, Mat value);
  int index_of(const std::string& name) const;  // -1 if absent
  int count() const { return static_cast<int>(values.size()); }
  long total_scalars() const;
  std::vector<Mat> zeros_like() const;
};

struct SurvivalModel {
  ModelConfig config;
  data::FeatureSchema schema;
  data::TimeGrid grid;
  ParameterSet params;

  static SurvivalModel init(const ModelConfig& cfg, const data::FeatureSchema& schema,
                            const data::TimeGrid& grid, std::uint64_t seed);

  int input_dim() const;
  bool has_router() const { return config.head != HeadKind::kLinearMtlr; }

  /// Builds features -> backbone -> head on the tape for a batch of records.
  /// hidden_out, when given, receives the backbone output node.
  moe::HeadGraph build_graph(ad::Tape& t,
                             const std::vector<const data::SurvivalRecord*>& batch,
                             ad::Var* hidden_out = nullptr) const;

  /// Batched pmf rows (and optionally routing rows) without gradient work.
  Mat predict_pmf(const data::Dataset& ds, int chunk = 256) const;
  Mat predict_alpha(const data::Dataset& ds, int chunk = 256) const;
};

void save_checkpoint(const SurvivalModel& model, const std::string& path);
SurvivalModel load_checkpoint(const std::string& path);

}  // namespace survmoe::model
