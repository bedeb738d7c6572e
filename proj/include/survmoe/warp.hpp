#pragma once

// Monotone time warp on [0,1]: a two-logistic mixture CDF, endpoint
// normalized so phi(0)=0 and phi(1)=1. The inverse is solved by bisection;
// parameter gradients of the inverse come from the implicit function theorem
// evaluated at the solved point, never from the bisection iterates.

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>

#include "survmoe/common.hpp"

namespace survmoe::warp {

inline constexpr double kSlopeMin = 0.1;
inline constexpr double kSlopeMax = 35.0;
inline constexpr double kCenterLo = 0.02;
inline constexpr double kCenterHi = 0.98;
inline constexpr double kCenterGap = 0.02;
inline constexpr double kDenomFloor = 1e-6;
inline constexpr double kFlatGradFloor = 1e-8;
// Enough halvings of [0,1] to pin the root at machine precision, so the
// inverse is a numerically smooth function of the parameters.
inline constexpr int kBisectIters = 52;

struct WarpParams {
  double w1, w2;  // mixture weights, on the 2-simplex
  double a1, a2;  // slopes, within [kSlopeMin, kSlopeMax] when learned
  double c1, c2;  // ordered centers inside (0,1)
};

/// Unnormalized mixture F(u).
inline double raw_mixture(double u, const WarpParams& p) {
  return p.w1 * sigmoid(p.a1 * (u - p.c1)) + p.w2 * sigmoid(p.a2 * (u - p.c2));
}

inline double norm_denom(const WarpParams& p) {
  return std::max(raw_mixture(1.0, p) - raw_mixture(0.0, p), kDenomFloor);
}

/// phi(u) = (F(u) - F(0)) / max(F(1) - F(0), kDenomFloor).
inline double forward(double u, const WarpParams& p) {
  return (raw_mixture(u, p) - raw_mixture(0.0, p)) / norm_denom(p);
}

/// psi(t): bisection on [0,1]; returns the bracket midpoint.
inline double inverse(double t, const WarpParams& p) {
  double lo = 0.0, hi = 1.0;
  const double f0 = raw_mixture(0.0, p);
  const double d = norm_denom(p);
  for (int s = 0; s < kBisectIters; ++s) {
    const double mid = 0.5 * (lo + hi);
    const double v = (raw_mixture(mid, p) - f0) / d - t;
    if (v < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct ParamGrads {
  double w1, w2, a1, a2, c1, c2;
};

namespace detail {

struct MixturePartials {
  double f;                    // F(u)
  double du;                   // dF/du
  double w1, w2, a1, a2, c1, c2;
};

inline MixturePartials partials(double u, const WarpParams& p) {
  const double s1 = sigmoid(p.a1 * (u - p.c1));
  const double s2 = sigmoid(p.a2 * (u - p.c2));
  const double d1 = s1 * (1.0 - s1);
  const double d2 = s2 * (1.0 - s2);
  MixturePartials m;
  m.f = p.w1 * s1 + p.w2 * s2;
  m.du = p.w1 * p.a1 * d1 + p.w2 * p.a2 * d2;
  m.w1 = s1;
  m.w2 = s2;
  m.a1 = p.w1 * (u - p.c1) * d1;
  m.a2 = p.w2 * (u - p.c2) * d2;
  m.c1 = -p.w1 * p.a1 * d1;
  m.c2 = -p.w2 * p.a2 * d2;
  return m;
}

}  // namespace detail

/// d tau* / d theta at a solved inverse point, via the implicit function
/// theorem on the normalized mixture. A near-flat warp (normalized slope
/// below kFlatGradFloor) clamps the denominator and bumps *flat_warnings.
inline ParamGrads inverse_param_grads(double tau_star, const WarpParams& p,
                                      int* flat_warnings = nullptr) {
  const auto at_tau = detail::partials(tau_star, p);
  const auto at0 = detail::partials(0.0, p);
  const auto at1 = detail::partials(1.0, p);
  const double d = norm_denom(p);
  const double phi = (at_tau.f - at0.f) / d;

  double den = at_tau.du / d;
  if (den < kFlatGradFloor) {
    den = kFlatGradFloor;
    if (flat_warnings) ++*flat_warnings;
  }

  const auto solve = [&](double g_tau, double g0, double g1) {
    const double num = (g_tau - g0 - phi * (g1 - g0)) / d;
    return -num / den;
  };
  ParamGrads g;
  g.w1 = solve(at_tau.w1, at0.w1, at1.w1);
  g.w2 = solve(at_tau.w2, at0.w2, at1.w2);
  g.a1 = solve(at_tau.a1, at0.a1, at1.a1);
  g.a2 = solve(at_tau.a2, at0.a2, at1.a2);
  g.c1 = solve(at_tau.c1, at0.c1, at1.c1);
  g.c2 = solve(at_tau.c2, at0.c2, at1.c2);
  return g;
}

/// Map six unconstrained reals to valid warp parameters:
/// weights by softmax, slopes by a scaled sigmoid into [kSlopeMin, kSlopeMax],
/// centers by stick-breaking into [kCenterLo, kCenterHi] with a minimum gap.
inline WarpParams constrain(const VecRef& raw) {
  assert(raw.size() == 6);
  WarpParams p;
  const double mx = std::max(raw[0], raw[1]);
  const double e1 = std::exp(raw[0] - mx), e2 = std::exp(raw[1] - mx);
  p.w1 = e1 / (e1 + e2);
  p.w2 = e2 / (e1 + e2);
  p.a1 = kSlopeMin + (kSlopeMax - kSlopeMin) * sigmoid(raw[2]);
  p.a2 = kSlopeMin + (kSlopeMax - kSlopeMin) * sigmoid(raw[3]);
  const double s1 = sigmoid(raw[4]);
  const double s2 = sigmoid(raw[5]);
  p.c1 = kCenterLo + s1 * (kCenterHi - kCenterGap - kCenterLo);
  p.c2 = p.c1 + kCenterGap + s2 * (kCenterHi - kCenterGap - p.c1);
  return p;
}

/// Jacobian of constrain(); rows order (w1,w2,a1,a2,c1,c2), columns raw[0..5].
inline Eigen::Matrix<double, 6, 6> constrain_jacobian(const VecRef& raw) {
  assert(raw.size() == 6);
  Eigen::Matrix<double, 6, 6> J = Eigen::Matrix<double, 6, 6>::Zero();
  const WarpParams p = constrain(raw);
  J(0, 0) = p.w1 * p.w2;
  J(0, 1) = -p.w1 * p.w2;
  J(1, 0) = -p.w1 * p.w2;
  J(1, 1) = p.w1 * p.w2;
  for (int r = 0; r < 2; ++r) {
    const double s = sigmoid(raw[2 + r]);
    J(2 + r, 2 + r) = (kSlopeMax - kSlopeMin) * s * (1.0 - s);
  }
  const double s1 = sigmoid(raw[4]);
  const double s2 = sigmoid(raw[5]);
  const double dc1 = (kCenterHi - kCenterGap - kCenterLo) * s1 * (1.0 - s1);
  J(4, 4) = dc1;
  J(5, 4) = (1.0 - s2) * dc1;
  J(5, 5) = (kCenterHi - kCenterGap - p.c1) * s2 * (1.0 - s2);
  return J;
}

/// Canonical grid t_j = j/(m-1) on [0,1].
inline Vec canonical_grid(int m) {
  assert(m >= 2);
  Vec t(m);
  for (int j = 0; j < m; ++j) t[j] = static_cast<double>(j) / (m - 1);
  return t;
}

/// Linear interpolation of a row at fractional index u in [0, m-1].
inline double lerp_at(const VecRef& row, double u) {
  const int m = static_cast<int>(row.size());
  int i0 = static_cast<int>(std::floor(u));
  i0 = std::clamp(i0, 0, m - 1);
  const int i1 = std::min(i0 + 1, m - 1);
  const double f = u - i0;
  return (1.0 - f) * row[i0] + f * row[i1];
}

/// Rebuild an expert prototype on the warped grid: index j reads the
/// prototype at fractional position (m-1) * psi(t_j).
inline Vec resample_prototype(const VecRef& proto, const WarpParams& p) {
  const int m = static_cast<int>(proto.size());
  const Vec grid = canonical_grid(m);
  Vec out(m);
  for (int j = 0; j < m; ++j)
    out[j] = lerp_at(proto, (m - 1) * inverse(grid[j], p));
  return out;
}

}  // namespace survmoe::warp
