#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "survmoe/heads.hpp"

using namespace survmoe;
namespace moe = survmoe::moe;

namespace {

Mat random_mat(std::mt19937_64& rng, int r, int c, double s = 1.0) {
  std::uniform_real_distribution<double> u(-s, s);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

Vec random_vec(std::mt19937_64& rng, int n, double s = 1.0) {
  return random_mat(rng, n, 1, s).col(0);
}

double inv_softplus(double y) { return std::log(std::expm1(y)); }

void check_pmf(const Vec& p, double tol = 1e-9) {
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(tol));
}

}  // namespace

TEST_CASE("route hand values") {
  Mat W(3, 2);
  W << 1, 0, 0, 0, 0, 0;  // logits (x0, 0, 0)
  Vec x(2);
  x << 1, 0;
  Vec a = moe::route(x, {W, 1.0});
  const double e = std::exp(1.0);
  CHECK(a[0] == doctest::Approx(e / (e + 2)).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(1 / (e + 2)).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(1 / (e + 2)).epsilon(1e-12));

  // zero weights: uniform regardless of input
  std::mt19937_64 rng(1);
  a = moe::route(random_vec(rng, 5), {Mat::Zero(4, 5), 2.0});
  for (int k = 0; k < 4; ++k) CHECK(a[k] == doctest::Approx(0.25).epsilon(1e-14));

  // very large temperature flattens the distribution
  a = moe::route(x, {random_mat(rng, 6, 2), 1e6});
  CHECK((a.array() - 1.0 / 6).abs().maxCoeff() < 1e-6);
}

TEST_CASE("route is invariant to a constant shift of the logits") {
  std::mt19937_64 rng(2);
  Vec x = random_vec(rng, 4);
  Mat W = random_mat(rng, 5, 4);
  // W2 x = W x + c for this particular x
  const double c = 0.8;
  Mat W2 = W + Vec::Ones(5) * (c * x.transpose() / x.squaredNorm());
  Vec a1 = moe::route(x, {W, 1.3});
  Vec a2 = moe::route(x, {W2, 1.3});
  CHECK((a1 - a2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fixed head: one-hot routing, single expert, recompute oracle") {
  std::mt19937_64 rng(3);
  const int h = 4, n = 3, m = 5;
  Mat M = random_mat(rng, n, m, 2.0);
  Vec x = random_vec(rng, h);

  // huge margin on expert 1 makes alpha one-hot to machine precision
  Mat W = Mat::Zero(n, h);
  W.row(1) = 200.0 * x.transpose() / x.squaredNorm();
  Vec p = moe::fixed_forward(x, {W, 1.0}, M);
  Vec expect = stable_softmax(M.row(1).transpose());
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-12);

  // n = 1: the router is trivial and p is the lone normalized prototype
  Mat M1 = random_mat(rng, 1, m, 2.0);
  p = moe::fixed_forward(x, {random_mat(rng, 1, h), 2.0}, M1);
  CHECK((p - stable_softmax(M1.row(0).transpose())).cwiseAbs().maxCoeff() < 1e-14);

  // independent per-coordinate recomputation
  Mat Wr = random_mat(rng, n, h);
  const double kappa = 1.7;
  p = moe::fixed_forward(x, {Wr, kappa}, M);
  Vec alpha = stable_softmax(Wr * x / kappa);
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      double denom = 0.0;
      for (int jj = 0; jj < m; ++jj) denom += std::exp(M(k, jj) - M.row(k).maxCoeff());
      acc += alpha[k] * std::exp(M(k, j) - M.row(k).maxCoeff()) / denom;
    }
    CHECK(p[j] == doctest::Approx(acc).epsilon(1e-12));
  }
  check_pmf(p);
}

TEST_CASE("fixed head is equivariant to permuting experts") {
  std::mt19937_64 rng(4);
  const int h = 6, n = 4, m = 7;
  Vec x = random_vec(rng, h);
  Mat W = random_mat(rng, n, h);
  Mat M = random_mat(rng, n, m);
  Vec p = moe::fixed_forward(x, {W, 0.9}, M);

  std::vector<int> perm = {2, 0, 3, 1};
  Mat Wp(n, h), Mp(n, m);
  for (int k = 0; k < n; ++k) {
    Wp.row(k) = W.row(perm[k]);
    Mp.row(k) = M.row(perm[k]);
  }
  Vec pp = moe::fixed_forward(x, {Wp, 0.9}, Mp);
  CHECK((p - pp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("adjustable head at near-identity init matches the fixed head") {
  std::mt19937_64 rng(5);
  const int h = 6, n = 3, m = 40;
  Vec x = random_vec(rng, h);
  Mat W = random_mat(rng, n, h);
  Mat M = random_mat(rng, n, m, 0.5);

  moe::WarpGenerators wg{Mat::Zero(6 * n, h), Vec::Zero(6 * n)};
  for (int k = 0; k < n; ++k) {
    wg.b[6 * k + 2] = moe::kSlopeRawInit;
    wg.b[6 * k + 3] = moe::kSlopeRawInit;
  }
  Vec pa = moe::adjustable_forward(x, {W, 2.0}, M, wg);
  Vec pf = moe::fixed_forward(x, {W, 2.0}, M);
  CHECK((pa - pf).cwiseAbs().maxCoeff() < 1e-3);
  check_pmf(pa);
}

TEST_CASE("adjustable head with one-hot routing returns the resampled expert") {
  std::mt19937_64 rng(6);
  const int h = 5, n = 2, m = 12;
  Vec x = random_vec(rng, h);
  Mat M = random_mat(rng, n, m, 1.5);
  Mat W = Mat::Zero(n, h);
  W.row(0) = 300.0 * x.transpose() / x.squaredNorm();
  moe::WarpGenerators wg{random_mat(rng, 6 * n, h, 0.3), random_vec(rng, 6 * n, 0.3)};

  Vec p = moe::adjustable_forward(x, {W, 1.0}, M, wg);
  const Vec raw = wg.W * x + wg.b;
  const warp::WarpParams wp = warp::constrain(raw.segment(0, 6));
  Vec expect = stable_softmax(warp::resample_prototype(M.row(0).transpose(), wp));
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("personalized head: zero input, single expert, chunk oracle") {
  std::mt19937_64 rng(7);
  const int h = 8, n = 4, m = 6;
  moe::PersonalizedParams pp;
  pp.Wr = random_mat(rng, h, h);
  pp.We = random_mat(rng, h, h);
  for (int k = 0; k < n; ++k) pp.L.push_back(random_mat(rng, m, h / n));
  Mat W = random_mat(rng, n, h);

  // x = 0 collapses both projections: uniform routing, uniform pmf
  Vec p = moe::personalized_forward(Vec::Zero(h), {W, 2.0}, pp);
  CHECK((p.array() - 1.0 / m).abs().maxCoeff() < 1e-14);

  // n = 1 is a single linear head over the expert projection
  moe::PersonalizedParams p1;
  p1.Wr = pp.Wr;
  p1.We = pp.We;
  p1.L.push_back(random_mat(rng, m, h));
  Vec x = random_vec(rng, h);
  p = moe::personalized_forward(x, {random_mat(rng, 1, h), 1.0}, p1);
  Vec expect = stable_softmax(p1.L[0] * (p1.We * x));
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-14);

  // per-chunk recomputation
  p = moe::personalized_forward(x, {W, 1.3}, pp);
  const Vec xr = pp.Wr * x, xe = pp.We * x;
  const Vec alpha = stable_softmax(W * xr / 1.3);
  Vec acc = Vec::Zero(m);
  for (int k = 0; k < n; ++k)
    acc += alpha[k] * stable_softmax(pp.L[k] * xe.segment(k * (h / n), h / n));
  CHECK((p - acc).cwiseAbs().maxCoeff() < 1e-13);
  check_pmf(p);
}

TEST_CASE("load balance hand values") {
  const double lambda = 0.01;
  Mat uniform = Mat::Constant(8, 10, 0.1);
  CHECK(moe::load_balance(uniform, lambda) == doctest::Approx(lambda).epsilon(1e-12));

  Mat onehot = Mat::Zero(8, 10);
  onehot.col(3).setOnes();
  CHECK(moe::load_balance(onehot, lambda) == doctest::Approx(lambda * 10).epsilon(1e-12));

  // one expert takes half the mass, the rest split the remainder evenly
  Mat skew(1, 10);
  skew(0, 0) = 0.5;
  for (int k = 1; k < 10; ++k) skew(0, k) = 0.5 / 9;
  CHECK(moe::load_balance(skew, lambda) == doctest::Approx(0.0277778).epsilon(1e-4));

  CHECK(moe::load_balance(Mat(), lambda) == 0.0);
}

TEST_CASE("all heads emit valid pmfs across parameter magnitudes") {
  std::mt19937_64 rng(8);
  const int h = 6, n = 3, m = 9;
  for (double s : {0.1, 1.0, 10.0, 40.0}) {
    Vec x = random_vec(rng, h, s);
    moe::RouterParams rp{random_mat(rng, n, h, s), 0.5};
    Mat M = random_mat(rng, n, m, s);
    check_pmf(moe::fixed_forward(x, rp, M));

    moe::WarpGenerators wg{random_mat(rng, 6 * n, h, s), random_vec(rng, 6 * n, s)};
    check_pmf(moe::adjustable_forward(x, rp, M, wg));

    moe::PersonalizedParams pp;
    pp.Wr = random_mat(rng, h, h, s);
    pp.We = random_mat(rng, h, h, s);
    for (int k = 0; k < n; ++k) pp.L.push_back(random_mat(rng, m, h / n, s));
    check_pmf(moe::personalized_forward(x, rp, pp));

    check_pmf(moe::linear_mtlr_forward(x, random_mat(rng, m, h, s), random_vec(rng, m, s)));
  }
}

TEST_CASE("tape graphs agree with the plain heads row by row") {
  std::mt19937_64 rng(9);
  const int B = 5, h = 6, n = 3, m = 8;
  Mat X = random_mat(rng, B, h);
  Mat W = random_mat(rng, n, h);
  Mat M = random_mat(rng, n, m);
  const double kappa = 1.9;
  Mat kraw(1, 1);
  kraw(0, 0) = inv_softplus(kappa);
  moe::RouterParams rp{W, kappa};

  {
    ad::Tape t;
    auto g = moe::fixed_head_graph(t, t.constant(X), t.param(W, 0), t.param(kraw, 1),
                                   t.param(M, 2));
    for (int i = 0; i < B; ++i) {
      Vec p = moe::fixed_forward(X.row(i).transpose(), rp, M);
      CHECK((t.val(g.pmf).row(i).transpose() - p).cwiseAbs().maxCoeff() < 1e-12);
      Vec a = moe::route(X.row(i).transpose(), rp);
      CHECK((t.val(g.alpha).row(i).transpose() - a).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  {
    moe::WarpGenerators wg{random_mat(rng, 6 * n, h, 0.4), random_vec(rng, 6 * n, 0.4)};
    Mat bg = wg.b.transpose();
    ad::Tape t;
    auto g = moe::adjustable_head_graph(t, t.constant(X), t.param(W, 0),
                                        t.param(kraw, 1), t.param(M, 2),
                                        t.param(wg.W, 3), t.param(bg, 4),
                                        warp::canonical_grid(m));
    for (int i = 0; i < B; ++i) {
      Vec p = moe::adjustable_forward(X.row(i).transpose(), rp, M, wg);
      CHECK((t.val(g.pmf).row(i).transpose() - p).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  {
    moe::PersonalizedParams pp;
    pp.Wr = random_mat(rng, h, h);
    pp.We = random_mat(rng, h, h);
    for (int k = 0; k < n; ++k) pp.L.push_back(random_mat(rng, m, h / n));
    ad::Tape t;
    std::vector<ad::Var> L;
    for (int k = 0; k < n; ++k) L.push_back(t.param(pp.L[k], 4 + k));
    auto g = moe::personalized_head_graph(t, t.constant(X), t.param(W, 0),
                                          t.param(kraw, 1), t.param(pp.Wr, 2),
                                          t.param(pp.We, 3), L);
    for (int i = 0; i < B; ++i) {
      Vec p = moe::personalized_forward(X.row(i).transpose(), rp, pp);
      CHECK((t.val(g.pmf).row(i).transpose() - p).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  {
    Mat Wz = random_mat(rng, m, h);
    Vec bz = random_vec(rng, m);
    Mat bzr = bz.transpose();
    ad::Tape t;
    auto g = moe::linear_mtlr_head_graph(t, t.constant(X), t.param(Wz, 0), t.param(bzr, 1));
    for (int i = 0; i < B; ++i) {
      Vec p = moe::linear_mtlr_forward(X.row(i).transpose(), Wz, bz);
      CHECK((t.val(g.pmf).row(i).transpose() - p).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}
