#include "survmoe/heads.hpp"

namespace survmoe::moe {

namespace {

ad::Var router_graph(ad::Tape& t, ad::Var X, ad::Var W, ad::Var kappa_raw) {
  ad::Var kappa = ad::softplus(kappa_raw);
  return ad::row_softmax(ad::div_by_scalar(ad::matmul_nt(X, W), kappa));
}

/// sum_k alpha[:,k] .* rows_k, accumulated across experts.
ad::Var mix_experts(ad::Var alpha, const std::vector<ad::Var>& expert_pmfs) {
  ad::Var acc;
  for (int k = 0; k < static_cast<int>(expert_pmfs.size()); ++k) {
    ad::Var term = ad::mul_colvec(expert_pmfs[k], ad::slice_cols(alpha, k, 1));
    acc = k == 0 ? term : ad::add(acc, term);
  }
  return acc;
}

}  // namespace

HeadGraph fixed_head_graph(ad::Tape& t, ad::Var X, ad::Var W, ad::Var kappa_raw,
                           ad::Var M) {
  ad::Var alpha = router_graph(t, X, W, kappa_raw);
  ad::Var pmf = ad::matmul(alpha, ad::row_softmax(M));
  return {pmf, alpha};
}

HeadGraph adjustable_head_graph(ad::Tape& t, ad::Var X, ad::Var W,
                                ad::Var kappa_raw, ad::Var M, ad::Var Wg,
                                ad::Var bg, const Vec& grid) {
  const int n = static_cast<int>(t.val(M).rows());
  const int m = static_cast<int>(grid.size());
  ad::Var alpha = router_graph(t, X, W, kappa_raw);
  ad::Var raw = ad::add_rowvec(ad::matmul_nt(X, Wg), bg);
  std::vector<ad::Var> experts;
  for (int k = 0; k < n; ++k) {
    ad::Var theta = ad::constrain_warp_rows(ad::slice_cols(raw, 6 * k, 6));
    ad::Var u = ad::scale(ad::warp_inverse_rows(theta, grid), m - 1.0);
    ad::Var res = ad::interp_rows(ad::slice_rows(M, k, 1), u);
    experts.push_back(ad::row_softmax(res));
  }
  return {mix_experts(alpha, experts), alpha};
}

HeadGraph personalized_head_graph(ad::Tape& t, ad::Var X, ad::Var W,
                                  ad::Var kappa_raw, ad::Var Wr, ad::Var We,
                                  const std::vector<ad::Var>& L) {
  const int n = static_cast<int>(L.size());
  const int h = static_cast<int>(t.val(We).rows());
  const int chunk = h / n;
  ad::Var Xr = ad::matmul_nt(X, Wr);
  ad::Var Xe = ad::matmul_nt(X, We);
  ad::Var alpha = router_graph(t, Xr, W, kappa_raw);
  std::vector<ad::Var> experts;
  for (int k = 0; k < n; ++k) {
    ad::Var scores = ad::matmul_nt(ad::slice_cols(Xe, k * chunk, chunk), L[k]);
    experts.push_back(ad::row_softmax(scores));
  }
  return {mix_experts(alpha, experts), alpha};
}

HeadGraph linear_mtlr_head_graph(ad::Tape& t, ad::Var X, ad::Var Wz, ad::Var bz) {
  ad::Var z = ad::add_rowvec(ad::matmul_nt(X, Wz), bz);
  ad::Var pmf = ad::row_softmax(ad::suffix_sum_rows(z));
  return {pmf, ad::Var{}};
}

}  // namespace survmoe::moe
