#include "survmoe/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "survmoe/mtlr.hpp"

namespace survmoe::train {

std::vector<ad::LossTarget> targets_of(const data::Dataset& ds, const data::TimeGrid& grid) {
  const auto encoded = data::discretize(ds, grid);
  std::vector<ad::LossTarget> out;
  out.reserve(encoded.size());
  for (const auto& e : encoded) out.push_back({e.bin_index, e.event == 1});
  return out;
}

double batch_loss(const Mat& pmf_rows, const Mat& alpha_rows,
                  const std::vector<ad::LossTarget>& targets, double lambda_lb) {
  if (targets.empty() || pmf_rows.rows() != static_cast<Eigen::Index>(targets.size()))
    throw std::invalid_argument("batch_loss: empty batch or target mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Vec z = mtlr::pmf_to_logits(pmf_rows.row(static_cast<Eigen::Index>(i)).transpose());
    total += targets[i].observed ? mtlr::uncensored_nll(z, targets[i].bin)
                                 : mtlr::censored_nll(z, targets[i].bin);
  }
  return total / static_cast<double>(targets.size()) +
         moe::load_balance(alpha_rows, lambda_lb);
}

ad::Var loss_graph(ad::Tape& t, const moe::HeadGraph& g,
                   const std::vector<ad::LossTarget>& targets, double lambda_lb) {
  if (targets.empty()) throw std::invalid_argument("loss_graph: empty batch");
  const ad::Var q = ad::row_normalize(ad::clamp_min(g.pmf, mtlr::kPmfFloor));
  const ad::Var z = ad::increment_logits_rows(ad::log(q));
  const ad::Var nll = ad::nll_rows(z, targets);
  ad::Var loss = ad::scale(ad::sum_all(nll), 1.0 / static_cast<double>(targets.size()));
  if (g.alpha.id >= 0) {
    const ad::Var am = ad::colwise_mean(g.alpha);
    const double n_experts = static_cast<double>(t.val(g.alpha).cols());
    loss = ad::add(loss, ad::scale(ad::sum_all(ad::cwise_mul(am, am)),
                                   lambda_lb * n_experts));
  }
  return loss;
}

double compute_gradients(const model::SurvivalModel& mod,
                         const std::vector<const data::SurvivalRecord*>& batch,
                         const std::vector<ad::LossTarget>& targets, double lambda_lb,
                         std::vector<Mat>& grads) {
  ad::Tape t;
  const moe::HeadGraph g = mod.build_graph(t, batch);
  const ad::Var loss = loss_graph(t, g, targets, lambda_lb);
  const double value = t.val(loss)(0, 0);
  if (!std::isfinite(value)) throw NumericalError("non-finite loss");
  t.backward(loss);
  grads = mod.params.zeros_like();
  t.accumulate_param_grads(grads);
  for (int i = 0; i < mod.params.count(); ++i)
    if (!grads[i].allFinite())
      throw NumericalError("non-finite gradient for parameter " + mod.params.names[i]);
  return value;
}

void adam_step(model::ParameterSet& params, const std::vector<Mat>& grads,
               AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (state.m1.empty()) {
    state.m1 = params.zeros_like();
    state.m2 = params.zeros_like();
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (int i = 0; i < params.count(); ++i) {
    state.m1[i] = kBeta1 * state.m1[i] + (1.0 - kBeta1) * grads[i];
    state.m2[i] = kBeta2 * state.m2[i] + (1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
    const Mat mhat = state.m1[i] / c1;
    const Mat vhat = state.m2[i] / c2;
    params.values[i] -= (lr * mhat.array() / (vhat.array().sqrt() + kEps)).matrix();
  }
}

double dataset_nll(const model::SurvivalModel& mod, const data::Dataset& ds) {
  const Mat pmf = mod.predict_pmf(ds);
  const auto targets = targets_of(ds, mod.grid);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Vec z = mtlr::pmf_to_logits(pmf.row(static_cast<Eigen::Index>(i)).transpose());
    total += targets[i].observed ? mtlr::uncensored_nll(z, targets[i].bin)
                                 : mtlr::censored_nll(z, targets[i].bin);
  }
  return total / static_cast<double>(targets.size());
}

TrainResult train(model::SurvivalModel mod, const data::Dataset& train_ds,
                  const data::Dataset& val_ds, const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.max_epochs < 1 ||
      cfg.patience < 1)
    throw std::invalid_argument("invalid training config");
  if (train_ds.size() == 0 || val_ds.size() == 0)
    throw std::invalid_argument("train/val splits must be non-empty");

  const auto all_targets = targets_of(train_ds, mod.grid);
  const int n = train_ds.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  AdamState state;
  std::vector<Mat> grads;
  TrainResult res;
  res.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_params = mod.params.values;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (int begin = 0; begin < n; begin += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - begin);  // last partial batch kept
      std::vector<const data::SurvivalRecord*> batch(b);
      std::vector<ad::LossTarget> targets(b);
      for (int i = 0; i < b; ++i) {
        batch[i] = &train_ds.records[order[begin + i]];
        targets[i] = all_targets[order[begin + i]];
      }
      double value;
      try {
        value = compute_gradients(mod, batch, targets, cfg.lambda_lb, grads);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " in epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(begin / cfg.batch_size));
      }
      adam_step(mod.params, grads, state, cfg.learning_rate);
      epoch_loss += value * b;
    }
    epoch_loss /= n;

    const double val = dataset_nll(mod, val_ds);
    res.history.push_back({epoch_loss, val});
    if (val < res.best_val_loss) {
      res.best_val_loss = val;
      res.best_epoch = epoch;
      best_params = mod.params.values;
    } else if (epoch - res.best_epoch >= cfg.patience) {
      break;
    }
  }
  mod.params.values = std::move(best_params);
  res.model = std::move(mod);
  return res;
}

std::vector<BlockReport> grad_check(model::SurvivalModel mod, const data::Dataset& batch_ds,
                                    double lambda_lb, double epsilon, int flip_block) {
  std::vector<const data::SurvivalRecord*> batch;
  for (const auto& r : batch_ds.records) batch.push_back(&r);
  const auto targets = targets_of(batch_ds, mod.grid);

  std::vector<Mat> analytic;
  compute_gradients(mod, batch, targets, lambda_lb, analytic);
  if (flip_block >= 0) analytic[flip_block] *= -1.0;

  auto eval = [&]() {
    ad::Tape t;
    const moe::HeadGraph g = mod.build_graph(t, batch);
    return t.val(loss_graph(t, g, targets, lambda_lb))(0, 0);
  };

  std::vector<BlockReport> out;
  for (int i = 0; i < mod.params.count(); ++i) {
    BlockReport rep{mod.params.names[i], 0.0};
    Mat& block = mod.params.values[i];
    for (int r = 0; r < block.rows(); ++r) {
      for (int c = 0; c < block.cols(); ++c) {
        const double orig = block(r, c);
        block(r, c) = orig + epsilon;
        const double up = eval();
        block(r, c) = orig - epsilon;
        const double dn = eval();
        block(r, c) = orig;
        const double fd = (up - dn) / (2.0 * epsilon);
        const double a = analytic[i](r, c);
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
      }
    }
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace survmoe::train
