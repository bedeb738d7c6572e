#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "survmoe/autodiff.hpp"
#include "survmoe/warp.hpp"

using namespace survmoe;
namespace ad = survmoe::ad;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

Mat random_mat(std::mt19937_64& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

double value_of(const std::vector<Mat>& params, const Builder& build) {
  ad::Tape t;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i)
    vars.push_back(t.param(params[i], static_cast<int>(i)));
  return t.val(build(t, vars))(0, 0);
}

std::vector<Mat> grads_of(const std::vector<Mat>& params, const Builder& build) {
  ad::Tape t;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i)
    vars.push_back(t.param(params[i], static_cast<int>(i)));
  t.backward(build(t, vars));
  std::vector<Mat> sink;
  for (const Mat& p : params) sink.push_back(Mat::Zero(p.rows(), p.cols()));
  t.accumulate_param_grads(sink);
  return sink;
}

/// Central finite differences over every coordinate of every parameter.
void fd_check(std::vector<Mat> params, const Builder& build, double tol = 1e-6,
              double eps = 1e-5) {
  const auto analytic = grads_of(params, build);
  for (std::size_t k = 0; k < params.size(); ++k)
    for (int i = 0; i < params[k].rows(); ++i)
      for (int j = 0; j < params[k].cols(); ++j) {
        const double keep = params[k](i, j);
        params[k](i, j) = keep + eps;
        const double up = value_of(params, build);
        params[k](i, j) = keep - eps;
        const double dn = value_of(params, build);
        params[k](i, j) = keep;
        const double fd = (up - dn) / (2 * eps);
        const double a = analytic[k](i, j);
        const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-5});
        INFO("param ", k, " entry (", i, ",", j, ") analytic ", a, " fd ", fd);
        CHECK(err < tol);
      }
}

}  // namespace

TEST_CASE("dense products") {
  std::mt19937_64 rng(1);
  const Mat C = random_mat(rng, 3, 5);
  fd_check({random_mat(rng, 3, 4), random_mat(rng, 4, 5)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::sum_all(ad::cwise_mul(ad::matmul(v[0], v[1]), t.constant(C)));
           });
  fd_check({random_mat(rng, 3, 4), random_mat(rng, 5, 4)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::sum_all(ad::cwise_mul(ad::matmul_nt(v[0], v[1]), t.constant(C)));
           });
}

TEST_CASE("elementwise and broadcast arithmetic") {
  std::mt19937_64 rng(2);
  const Mat C = random_mat(rng, 4, 3);
  auto weighted = [&](ad::Tape& t, ad::Var y) {
    return ad::sum_all(ad::cwise_mul(y, t.constant(C)));
  };
  fd_check({random_mat(rng, 4, 3), random_mat(rng, 4, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::add(v[0], ad::scale(ad::sub(v[0], v[1]), 0.7)));
           });
  fd_check({random_mat(rng, 4, 3), random_mat(rng, 1, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::add_rowvec(v[0], v[1]));
           });
  fd_check({random_mat(rng, 4, 3), random_mat(rng, 4, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::cwise_mul(ad::add_scalar(v[0], 0.3), v[1]));
           });
}

TEST_CASE("nonlinearities") {
  std::mt19937_64 rng(3);
  const Mat C = random_mat(rng, 4, 3);
  auto weighted = [&](ad::Tape& t, ad::Var y) {
    return ad::sum_all(ad::cwise_mul(y, t.constant(C)));
  };
  // keep relu/clamp inputs away from their kinks
  Mat x = random_mat(rng, 4, 3);
  x = x.unaryExpr([](double v) { return std::abs(v) < 0.05 ? v + 0.1 : v; });
  fd_check({x}, [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    return weighted(t, ad::relu(v[0]));
  });
  fd_check({random_mat(rng, 4, 3, -3, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::sigmoid(v[0]));
           });
  fd_check({random_mat(rng, 4, 3, -3, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::softplus(v[0]));
           });
  fd_check({random_mat(rng, 4, 3, 0.5, 2.0)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::log(ad::clamp_min(v[0], 0.1)));
           });
}

TEST_CASE("row-wise softmax and normalize") {
  std::mt19937_64 rng(4);
  const Mat C = random_mat(rng, 5, 4);
  auto weighted = [&](ad::Tape& t, ad::Var y) {
    return ad::sum_all(ad::cwise_mul(y, t.constant(C)));
  };
  fd_check({random_mat(rng, 5, 4, -2, 2)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::row_softmax(v[0]));
           });
  fd_check({random_mat(rng, 5, 4, 0.2, 2.0)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return weighted(t, ad::row_normalize(v[0]));
           });
}

TEST_CASE("shape plumbing") {
  std::mt19937_64 rng(5);
  const Mat C = random_mat(rng, 4, 6);
  fd_check({random_mat(rng, 4, 3), random_mat(rng, 4, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             ad::Var cat = ad::concat_cols({v[0], v[1]});
             return ad::sum_all(ad::cwise_mul(cat, t.constant(C)));
           });
  const Mat C2 = random_mat(rng, 2, 2);
  fd_check({random_mat(rng, 5, 4)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             ad::Var block = ad::slice_rows(ad::slice_cols(v[0], 1, 2), 2, 2);
             return ad::sum_all(ad::cwise_mul(block, t.constant(C2)));
           });
  // gather with repeated rows must accumulate
  const Mat C3 = random_mat(rng, 4, 3);
  fd_check({random_mat(rng, 3, 3)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             ad::Var g = ad::gather_rows(v[0], {2, 0, 2, 1});
             return ad::sum_all(ad::cwise_mul(g, t.constant(C3)));
           });
}

TEST_CASE("scalar node and column broadcasting") {
  std::mt19937_64 rng(6);
  const Mat C = random_mat(rng, 4, 3);
  Mat s(1, 1);
  s(0, 0) = 1.7;
  fd_check({random_mat(rng, 4, 3), s},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::sum_all(ad::cwise_mul(ad::div_by_scalar(v[0], v[1]), t.constant(C)));
           });
  fd_check({random_mat(rng, 4, 3), random_mat(rng, 4, 1)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::sum_all(ad::cwise_mul(ad::mul_colvec(v[0], v[1]), t.constant(C)));
           });
  fd_check({random_mat(rng, 6, 4)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             const Mat Cm = Mat::Constant(1, 4, 0.9);
             return ad::sum_all(ad::cwise_mul(ad::colwise_mean(v[0]), t.constant(Cm)));
           });
}

TEST_CASE("survival loss pipeline") {
  std::mt19937_64 rng(7);
  const Mat C = random_mat(rng, 3, 6);
  fd_check({random_mat(rng, 3, 6)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::sum_all(ad::cwise_mul(ad::suffix_sum_rows(v[0]), t.constant(C)));
           });
  fd_check({random_mat(rng, 3, 6)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::sum_all(
                 ad::cwise_mul(ad::increment_logits_rows(v[0]), t.constant(C)));
           });

  std::vector<ad::LossTarget> targets = {{2, true}, {0, false}, {4, false}, {5, true}};
  fd_check({random_mat(rng, 4, 6)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             return ad::scale(ad::sum_all(ad::nll_rows(v[0], targets)), 0.25);
           });

  // pmf (strictly positive, not normalized) through the full conversion
  fd_check({random_mat(rng, 4, 6, 0.1, 1.0)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             ad::Var p = ad::row_normalize(ad::clamp_min(v[0], 1e-12));
             ad::Var z = ad::increment_logits_rows(ad::log(p));
             return ad::scale(ad::sum_all(ad::nll_rows(z, targets)), 0.25);
           });
}

TEST_CASE("warp pipeline: constrain, invert, resample") {
  std::mt19937_64 rng(8);
  const int m = 6;
  const Vec grid = warp::canonical_grid(m);
  const Mat C = random_mat(rng, 3, m);

  const Mat Ctheta = random_mat(rng, 3, 6);
  fd_check({random_mat(rng, 3, 6, -2, 2)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             ad::Var theta = ad::constrain_warp_rows(v[0]);
             return ad::sum_all(ad::cwise_mul(theta, t.constant(Ctheta)));
           },
           1e-6);

  fd_check({random_mat(rng, 3, 6, -2, 2), random_mat(rng, 1, m)},
           [&](ad::Tape& t, const std::vector<ad::Var>& v) {
             ad::Var theta = ad::constrain_warp_rows(v[0]);
             ad::Var tau = ad::warp_inverse_rows(theta, grid);
             ad::Var u = ad::scale(tau, static_cast<double>(m - 1));
             ad::Var res = ad::interp_rows(v[1], u);
             return ad::sum_all(ad::cwise_mul(res, t.constant(C)));
           },
           1e-4);
}

TEST_CASE("constants do not accumulate gradients and graphs reuse nodes") {
  ad::Tape t;
  Mat x0 = Mat::Constant(2, 2, 1.5);
  ad::Var x = t.param(x0, 0);
  ad::Var c = t.constant(Mat::Constant(2, 2, 3.0));
  ad::Var y = ad::cwise_mul(ad::add(x, c), x);  // (x+c) .* x, x used twice
  t.backward(ad::sum_all(y));
  std::vector<Mat> sink{Mat::Zero(2, 2)};
  t.accumulate_param_grads(sink);
  // d/dx [(x+3)x] = 2x + 3
  CHECK(sink[0](0, 0) == doctest::Approx(2 * 1.5 + 3.0).epsilon(1e-14));
  CHECK(sink[0](1, 1) == doctest::Approx(6.0).epsilon(1e-14));
}
