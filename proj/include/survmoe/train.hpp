#pragma once

// Mini-batch Adam training with early stopping, plus the finite-difference
// gradient checker used by the verification tooling.

#include <cstdint>
#include <string>
#include <vector>

#include "survmoe/model.hpp"

namespace survmoe::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  double lambda_lb = 0.01;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 42;
};

std::vector<ad::LossTarget> targets_of(const data::Dataset& ds, const data::TimeGrid& grid);

/// Mean NLL over pmf rows plus the load-balance term over routing rows.
/// Pass an empty alpha matrix for router-less heads.
double batch_loss(const Mat& pmf_rows, const Mat& alpha_rows,
                  const std::vector<ad::LossTarget>& targets, double lambda_lb);

/// The same objective assembled on the tape, sharing the head graph.
ad::Var loss_graph(ad::Tape& t, const moe::HeadGraph& g,
                   const std::vector<ad::LossTarget>& targets, double lambda_lb);

/// Analytic gradients of batch_loss for one batch, accumulated into grads
/// (sized like the parameter set). Returns the loss value. Throws
/// NumericalError on non-finite loss or gradients, naming the block.
double compute_gradients(const model::SurvivalModel& mod,
                         const std::vector<const data::SurvivalRecord*>& batch,
                         const std::vector<ad::LossTarget>& targets, double lambda_lb,
                         std::vector<Mat>& grads);

struct AdamState {
  std::vector<Mat> m1, m2;
  long step = 0;
};

/// Standard Adam with (0.9, 0.999, 1e-8) and bias correction.
void adam_step(model::ParameterSet& params, const std::vector<Mat>& grads,
               AdamState& state, double lr);

struct EpochStats {
  double train_loss = 0.0;  // optimized objective (NLL + load balance)
  double val_loss = 0.0;    // pure mean NLL
};

struct TrainResult {
  model::SurvivalModel model;  // parameters from the best-val epoch
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

/// Pure mean NLL of the model over a dataset (no load-balance term).
double dataset_nll(const model::SurvivalModel& mod, const data::Dataset& ds);

TrainResult train(model::SurvivalModel mod, const data::Dataset& train_ds,
                  const data::Dataset& val_ds, const TrainConfig& cfg);

struct BlockReport {
  std::string name;
  double max_rel_err = 0.0;
};

/// Central finite differences vs analytic gradients, per parameter block.
/// flip_block >= 0 negates that block's analytic gradient first: a deliberate
/// fault injection proving the checker can fail.
std::vector<BlockReport> grad_check(model::SurvivalModel mod, const data::Dataset& batch_ds,
                                    double lambda_lb, double epsilon, int flip_block = -1);

}  // namespace survmoe::train
