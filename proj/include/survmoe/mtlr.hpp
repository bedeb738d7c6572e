#pragma once

// Discrete-time survival likelihood over m time bins.
//
// A length-m vector of increment logits z parameterizes a probability mass
// function over the m bins (the last bin absorbs "at or beyond the horizon").
// With suffix sums u_j = sum_{t>=j} z_t, the pmf is softmax(u); the m
// monotone outcome sequences score exp(u_j), one per event bin.

#include <Eigen/Core>

#include <cassert>
#include <cmath>

#include "survmoe/common.hpp"

namespace survmoe::mtlr {

inline constexpr double kPmfFloor = 1e-12;

/// u_j = z_j + z_{j+1} + ... + z_{m-1}
inline Vec suffix_sums(const VecRef& z) {
  const Eigen::Index m = z.size();
  Vec u(m);
  double acc = 0.0;
  for (Eigen::Index j = m - 1; j >= 0; --j) {
    acc += z[j];
    u[j] = acc;
  }
  return u;
}

/// Event pmf over bins: softmax of the suffix sums, max-subtracted.
inline Vec logits_to_pmf(const VecRef& z) {
  assert(z.size() >= 1);
  return stable_softmax(suffix_sums(z));
}

/// Inverse map fixing the gauge z_{m-1} = 0. The pmf is floored at kPmfFloor
/// and renormalized before taking logs, so degenerate inputs stay finite.
inline Vec pmf_to_logits(const VecRef& pmf) {
  const Eigen::Index m = pmf.size();
  assert(m >= 1);
  Vec p = pmf.cwiseMax(kPmfFloor);
  p /= p.sum();
  Vec z(m);
  for (Eigen::Index j = 0; j + 1 < m; ++j)
    z[j] = std::log(p[j]) - std::log(p[j + 1]);
  z[m - 1] = 0.0;
  return z;
}

/// -log p(event in bin) for an observed event, via stable log-sum-exp.
inline double uncensored_nll(const VecRef& z, int event_bin) {
  assert(event_bin >= 0 && event_bin < z.size());
  const Vec u = suffix_sums(z);
  return logsumexp(u) - u[event_bin];
}

/// -log P(event at or after censor_bin): log-sum-exp over the tail suffix
/// sums minus the full normalizer. censor_bin == 0 gives exactly 0.
inline double censored_nll(const VecRef& z, int censor_bin) {
  assert(censor_bin >= 0 && censor_bin < z.size());
  const Vec u = suffix_sums(z);
  const double full = logsumexp(u);
  if (censor_bin == 0) return 0.0;
  const double tail = logsumexp(u.tail(u.size() - censor_bin));
  return full - tail;
}

/// d uncensored_nll / dz. With u the suffix sums, the u-gradient is
/// softmax(u) - onehot(event_bin); z_t collects the prefix sum over j <= t.
inline Vec uncensored_nll_grad(const VecRef& z, int event_bin) {
  const Vec u = suffix_sums(z);
  Vec du = stable_softmax(u);
  du[event_bin] -= 1.0;
  Vec dz(z.size());
  double acc = 0.0;
  for (Eigen::Index t = 0; t < z.size(); ++t) {
    acc += du[t];
    dz[t] = acc;
  }
  return dz;
}

/// d censored_nll / dz: softmax(u) minus the tail-restricted softmax,
/// prefix-summed into z coordinates.
inline Vec censored_nll_grad(const VecRef& z, int censor_bin) {
  const Eigen::Index m = z.size();
  const Vec u = suffix_sums(z);
  Vec du = stable_softmax(u);
  const Vec tail = stable_softmax(u.tail(m - censor_bin));
  du.tail(m - censor_bin) -= tail;
  Vec dz(m);
  double acc = 0.0;
  for (Eigen::Index t = 0; t < m; ++t) {
    acc += du[t];
    dz[t] = acc;
  }
  return dz;
}

/// S_j = P(event after bin j) = 1 - cumulative pmf through bin j.
/// Non-increasing, S_{m-1} = 0 up to rounding.
inline Vec survival_curve(const VecRef& pmf) {
  const Eigen::Index m = pmf.size();
  Vec s(m);
  double cum = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    cum += pmf[j];
    s[j] = 1.0 - cum;
  }
  return s.cwiseMax(0.0);
}

}  // namespace survmoe::mtlr
