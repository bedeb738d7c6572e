#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace survmoe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;
using MatRef = Eigen::Ref<const Eigen::MatrixXd>;
using Rng = std::mt19937_64;

/// Raised when the numerics go bad (non-finite loss, singular inverse, ...).
/// The CLI maps this to exit code 2; plain invalid_argument maps to 1.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  // log(1+e^x) without overflow for large |x|
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double logsumexp(const VecRef& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Max-subtracted softmax; safe for any finite input.
inline Vec stable_softmax(const VecRef& v) {
  Vec e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

/// Shortest stable decimal form that round-trips a double (CSV/report output).
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace survmoe
