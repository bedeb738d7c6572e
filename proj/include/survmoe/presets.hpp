#pragma once

// Named hyperparameter presets for the benchmark datasets: per-dataset,
// model-specific values (hidden dim, layers, experts, learning rate) over
// shared settings (batch 64, lambda_lb 0.01, kappa 2.0, m = 100,
// patience 10).

#include <string>
#include <vector>

#include "survmoe/model.hpp"

namespace survmoe::presets {

struct Preset {
  std::string name;
  model::HeadKind head = model::HeadKind::kFixed;
  int hidden_dim = 0;
  int layers = 0;
  int experts = 0;  // 0 for the linear head
  double learning_rate = 0.0;
  int batch_size = 64;
  double lambda_lb = 0.01;
  double kappa_init = 2.0;
  int bins = 100;
  int patience = 10;
  int max_epochs = 500;
};

const std::vector<Preset>& all_presets();

/// nullptr when no preset has that name.
const Preset* find_preset(const std::string& name);

/// Comma-separated preset names for usage messages.
std::string preset_names();

}  // namespace survmoe::presets
