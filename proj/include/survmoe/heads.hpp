#pragma once

// Mixture-of-experts prediction heads over a shared hidden state x.
//
// All heads emit a pmf over m time bins. The router is a temperature-scaled
// softmax over linear scores. Expert prototypes are unnormalized score rows;
// normalization to pmf space is a row-wise softmax.
//
// Each head exists twice: a plain per-record function (the reference
// implementation used in evaluation-free contexts and tests) and a tape
// graph builder used for training; the two are tested to agree.

#include <Eigen/Core>

#include <cassert>
#include <vector>

#include "survmoe/autodiff.hpp"
#include "survmoe/common.hpp"
#include "survmoe/mtlr.hpp"
#include "survmoe/warp.hpp"

namespace survmoe::moe {

/// Initial raw slope bias for warp generators; keeps initial warps
/// near-identity (slopes just above the lower bound).
inline constexpr double kSlopeRawInit = -8.0;

struct RouterParams {
  Mat W;         // experts x hidden
  double kappa;  // temperature > 0
};

struct WarpGenerators {
  Mat W;  // (6 * experts) x hidden
  Vec b;  // 6 * experts
};

struct PersonalizedParams {
  Mat Wr;              // hidden x hidden, router projection
  Mat We;              // hidden x hidden, expert projection
  std::vector<Mat> L;  // per expert: bins x (hidden / experts)
};

inline Mat softmax_rows(const MatRef& scores) {
  Mat out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    out.row(i) = stable_softmax(scores.row(i).transpose()).transpose();
  return out;
}

/// alpha = softmax(x W^T / kappa).
inline Vec route(const VecRef& x, const RouterParams& rp) {
  assert(rp.kappa > 0.0);
  return stable_softmax(rp.W * x / rp.kappa);
}

/// p = sum_k alpha_k softmax(M_k).
inline Vec fixed_forward(const VecRef& x, const RouterParams& rp, const MatRef& M) {
  const Vec alpha = route(x, rp);
  return softmax_rows(M).transpose() * alpha;
}

/// Each expert's prototype row is resampled through its own input-conditioned
/// warp before normalization and mixing.
inline Vec adjustable_forward(const VecRef& x, const RouterParams& rp,
                              const MatRef& M, const WarpGenerators& wg) {
  const int n = static_cast<int>(M.rows());
  assert(wg.W.rows() == 6 * n && wg.b.size() == 6 * n);
  const Vec alpha = route(x, rp);
  const Vec raw = wg.W * x + wg.b;
  Mat resampled(n, M.cols());
  for (int k = 0; k < n; ++k) {
    const warp::WarpParams p = warp::constrain(raw.segment(6 * k, 6));
    resampled.row(k) = warp::resample_prototype(M.row(k).transpose(), p).transpose();
  }
  return softmax_rows(resampled).transpose() * alpha;
}

/// Prototypes are synthesized per record from chunks of a projected hidden
/// state; routing runs on a separate projection.
inline Vec personalized_forward(const VecRef& x, const RouterParams& rp,
                                const PersonalizedParams& pp) {
  const int n = static_cast<int>(pp.L.size());
  const Eigen::Index h = pp.We.rows();
  assert(h % n == 0);
  const Eigen::Index chunk = h / n;
  const Vec xr = pp.Wr * x;
  const Vec xe = pp.We * x;
  const Vec alpha = route(xr, rp);
  Mat scores(n, pp.L.front().rows());
  for (int k = 0; k < n; ++k)
    scores.row(k) = (pp.L[k] * xe.segment(k * chunk, chunk)).transpose();
  return softmax_rows(scores).transpose() * alpha;
}

///// Single linear head: increment logits read directly off x.
inline Vec linear_mtlr_forward(const VecRef& x, const MatRef& Wz, const VecRef& bz) {
  Vec z = Wz * x + bz;
  return stable_softmax(mtlr::suffix_sums(z));
}

/// lambda * n * sum_i mean_batch(alpha_i)^2; zero when there is no router.
inline double load_balance(const MatRef& alpha_rows, double lambda) {
  if (alpha_rows.size() == 0) return 0.0;
  const Vec mean = alpha_rows.colwise().mean();
  return lambda * static_cast<double>(alpha_rows.cols()) * mean.squaredNorm();
}

// --- tape graph builders -------------------------------------------------

struct HeadGraph {
  ad::Var pmf;    // batch x bins
  ad::Var alpha;  // batch x experts; invalid for the linear head
};

HeadGraph fixed_head_graph(ad::Tape& t, ad::Var X, ad::Var W, ad::Var kappa_raw,
                           ad::Var M);
HeadGraph adjustable_head_graph(ad::Tape& t, ad::Var X, ad::Var W,
                                ad::Var kappa_raw, ad::Var M, ad::Var Wg,
                                ad::Var bg, const Vec& grid);
HeadGraph personalized_head_graph(ad::Tape& t, ad::Var X, ad::Var W,
                                  ad::Var kappa_raw, ad::Var Wr, ad::Var We,
                                  const std::vector<ad::Var>& L);
HeadGraph linear_mtlr_head_graph(ad::Tape& t, ad::Var X, ad::Var Wz, ad::Var bz);

}  // namespace survmoe::moe
