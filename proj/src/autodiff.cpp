#include "survmoe/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <utility>

#include "survmoe/mtlr.hpp"
#include "survmoe/warp.hpp"

namespace survmoe::ad {

namespace {

// shared by interp_rows forward and backward so both see the same cell
struct LerpCell {
  int i0, i1;
  double frac;
};

LerpCell lerp_cell(double u, int m) {
  int i0 = static_cast<int>(std::floor(u));
  if (i0 < 0) i0 = 0;
  if (i0 > m - 1) i0 = m - 1;
  const int i1 = std::min(i0 + 1, m - 1);
  return {i0, i1, u - i0};
}

}  // namespace

Var Tape::emit(Mat value, std::vector<int> parents, Pull pull) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents)
    if (nodes_[p].needs_grad) n.needs_grad = true;
  if (n.needs_grad) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Mat value, int slot) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  n.slot = slot;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Mat& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  assert(root.tape == this && !swept_);
  assert(val(root).rows() == 1 && val(root).cols() == 1);
  swept_ = true;
  grad_ref(root.id)(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.pull || n.grad.size() == 0) continue;
    n.pull(*this, id);
  }
}

void Tape::accumulate_param_grads(std::vector<Mat>& sink) const {
  for (const Node& n : nodes_) {
    if (n.slot < 0 || n.grad.size() == 0) continue;
    assert(n.slot < static_cast<int>(sink.size()));
    sink[n.slot] += n.grad;
  }
}

// ---------------------------------------------------------------------------
// ops

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const int pa = a.id, pb = b.id;
  return t.emit(t.val(a) * t.val(b), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(pa)) t.grad_ref(pa).noalias() += g * t.val(pb).transpose();
    if (t.needs_grad(pb)) t.grad_ref(pb).noalias() += t.val(pa).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape;
  const int pa = a.id, pb = b.id;
  return t.emit(t.val(a) * t.val(b).transpose(), {pa, pb},
                [pa, pb](Tape& t, int self) {
                  const Mat& g = t.grad_ref(self);
                  if (t.needs_grad(pa)) t.grad_ref(pa).noalias() += g * t.val(pb);
                  if (t.needs_grad(pb)) t.grad_ref(pb).noalias() += g.transpose() * t.val(pa);
                });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const int pa = a.id, pb = b.id;
  return t.emit(t.val(a) + t.val(b), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(pa)) t.grad_ref(pa) += g;
    if (t.needs_grad(pb)) t.grad_ref(pb) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  const int pa = a.id, pb = b.id;
  return t.emit(t.val(a) - t.val(b), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(pa)) t.grad_ref(pa) += g;
    if (t.needs_grad(pb)) t.grad_ref(pb) -= g;
  });
}

Var add_rowvec(Var a, Var row) {
  Tape& t = *a.tape;
  const int pa = a.id, pr = row.id;
  assert(t.val(row).rows() == 1 && t.val(row).cols() == t.val(a).cols());
  Mat y = t.val(a);
  y.rowwise() += t.val(row).row(0);
  return t.emit(std::move(y), {pa, pr}, [pa, pr](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(pa)) t.grad_ref(pa) += g;
    if (t.needs_grad(pr)) t.grad_ref(pr) += g.colwise().sum();
  });
}

Var cwise_mul(Var a, Var b) {
  Tape& t = *a.tape;
  const int pa = a.id, pb = b.id;
  return t.emit(t.val(a).cwiseProduct(t.val(b)), {pa, pb},
                [pa, pb](Tape& t, int self) {
                  const Mat& g = t.grad_ref(self);
                  if (t.needs_grad(pa)) t.grad_ref(pa) += g.cwiseProduct(t.val(pb));
                  if (t.needs_grad(pb)) t.grad_ref(pb) += g.cwiseProduct(t.val(pa));
                });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a) * c, {pa}, [pa, c](Tape& t, int self) {
    if (t.needs_grad(pa)) t.grad_ref(pa) += t.grad_ref(self) * c;
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a).array() + c, {pa}, [pa](Tape& t, int self) {
    if (t.needs_grad(pa)) t.grad_ref(pa) += t.grad_ref(self);
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a).cwiseMax(0.0), {pa}, [pa](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    t.grad_ref(pa) += t.grad_ref(self).cwiseProduct(
        (t.val(pa).array() > 0.0).cast<double>().matrix());
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  Mat y = t.val(a).unaryExpr([](double x) { return survmoe::sigmoid(x); });
  return t.emit(std::move(y), {pa}, [pa](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    const Mat& y = t.val(self);
    t.grad_ref(pa).array() +=
        t.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var softplus(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  Mat y = t.val(a).unaryExpr([](double x) { return survmoe::softplus(x); });
  return t.emit(std::move(y), {pa}, [pa](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    t.grad_ref(pa) += t.grad_ref(self).cwiseProduct(
        t.val(pa).unaryExpr([](double x) { return survmoe::sigmoid(x); }));
  });
}

Var clamp_min(Var a, double floor) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a).cwiseMax(floor), {pa}, [pa, floor](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    t.grad_ref(pa) += t.grad_ref(self).cwiseProduct(
        (t.val(pa).array() > floor).cast<double>().matrix());
  });
}

Var log(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a).array().log(), {pa}, [pa](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    t.grad_ref(pa).array() += t.grad_ref(self).array() / t.val(pa).array();
  });
}

Var row_softmax(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  Mat y = t.val(a);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::ArrayXd r = y.row(i).array() - y.row(i).maxCoeff();
    r = r.exp();
    y.row(i) = r / r.sum();
  }
  return t.emit(std::move(y), {pa}, [pa](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    const Mat& y = t.val(self);
    const Mat& g = t.grad_ref(self);
    Mat& out = t.grad_ref(pa);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      out.row(i).array() += (g.row(i).array() - dot) * y.row(i).array();
    }
  });
}

Var row_normalize(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  Mat y = t.val(a);
  Vec sums = y.rowwise().sum();
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) /= sums[i];
  return t.emit(std::move(y), {pa}, [pa, sums](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    const Mat& y = t.val(self);
    const Mat& g = t.grad_ref(self);
    Mat& out = t.grad_ref(pa);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      out.row(i).array() += (g.row(i).array() - dot) / sums[i];
    }
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  Mat y(1, 1);
  y(0, 0) = t.val(a).sum();
  return t.emit(std::move(y), {pa}, [pa](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    t.grad_ref(pa).array() += t.grad_ref(self)(0, 0);
  });
}

Var colwise_mean(Var a) {
  Tape& t = *a.tape;
  const int pa = a.id;
  const double inv = 1.0 / static_cast<double>(t.val(a).rows());
  Mat y = t.val(a).colwise().sum() * inv;
  return t.emit(std::move(y), {pa}, [pa, inv](Tape& t, int self) {
    if (!t.needs_grad(pa)) return;
    Mat& out = t.grad_ref(pa);
    out += (t.grad_ref(self) * inv).replicate(out.rows(), 1);
  });
}

Var slice_cols(Var a, int col0, int ncols) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a).middleCols(col0, ncols), {pa},
                [pa, col0, ncols](Tape& t, int self) {
                  if (!t.needs_grad(pa)) return;
                  t.grad_ref(pa).middleCols(col0, ncols) += t.grad_ref(self);
                });
}

Var slice_rows(Var a, int row0, int nrows) {
  Tape& t = *a.tape;
  const int pa = a.id;
  return t.emit(t.val(a).middleRows(row0, nrows), {pa},
                [pa, row0, nrows](Tape& t, int self) {
                  if (!t.needs_grad(pa)) return;
                  t.grad_ref(pa).middleRows(row0, nrows) += t.grad_ref(self);
                });
}

Var concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Tape& t = *parts.front().tape;
  std::vector<int> ids;
  Eigen::Index cols = 0;
  const Eigen::Index rows = t.val(parts.front()).rows();
  for (const Var& v : parts) {
    ids.push_back(v.id);
    cols += t.val(v).cols();
  }
  Mat y(rows, cols);
  Eigen::Index at = 0;
  for (const Var& v : parts) {
    y.middleCols(at, t.val(v).cols()) = t.val(v);
    at += t.val(v).cols();
  }
  return t.emit(std::move(y), ids, [ids](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    Eigen::Index at = 0;
    for (int pid : ids) {
      const Eigen::Index w = t.val(pid).cols();
      if (t.needs_grad(pid)) t.grad_ref(pid) += g.middleCols(at, w);
      at += w;
    }
  });
}

Var gather_rows(Var table, std::vector<int> rows) {
  Tape& t = *table.tape;
  const int pt = table.id;
  Mat y(static_cast<Eigen::Index>(rows.size()), t.val(table).cols());
  for (std::size_t i = 0; i < rows.size(); ++i) y.row(i) = t.val(table).row(rows[i]);
  return t.emit(std::move(y), {pt}, [pt, rows = std::move(rows)](Tape& t, int self) {
    if (!t.needs_grad(pt)) return;
    const Mat& g = t.grad_ref(self);
    Mat& out = t.grad_ref(pt);
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(rows[i]) += g.row(i);
  });
}

Var div_by_scalar(Var a, Var s) {
  Tape& t = *a.tape;
  const int pa = a.id, ps = s.id;
  assert(t.val(s).size() == 1);
  const double sv = t.val(s)(0, 0);
  return t.emit(t.val(a) / sv, {pa, ps}, [pa, ps, sv](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(pa)) t.grad_ref(pa) += g / sv;
    if (t.needs_grad(ps))
      t.grad_ref(ps)(0, 0) -= g.cwiseProduct(t.val(self)).sum() / sv;
  });
}

Var mul_colvec(Var a, Var col) {
  Tape& t = *a.tape;
  const int pa = a.id, pc = col.id;
  assert(t.val(col).cols() == 1 && t.val(col).rows() == t.val(a).rows());
  Mat y = t.val(a);
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) *= t.val(col)(i, 0);
  return t.emit(std::move(y), {pa, pc}, [pa, pc](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    if (t.needs_grad(pa)) {
      Mat& out = t.grad_ref(pa);
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        out.row(i) += g.row(i) * t.val(pc)(i, 0);
    }
    if (t.needs_grad(pc)) {
      Mat& out = t.grad_ref(pc);
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        out(i, 0) += g.row(i).dot(t.val(pa).row(i));
    }
  });
}

Var suffix_sum_rows(Var z) {
  Tape& t = *z.tape;
  const int pz = z.id;
  Mat y = t.val(z);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = y.cols() - 2; j >= 0; --j) y(i, j) += y(i, j + 1);
  return t.emit(std::move(y), {pz}, [pz](Tape& t, int self) {
    if (!t.needs_grad(pz)) return;
    const Mat& g = t.grad_ref(self);
    Mat& out = t.grad_ref(pz);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        acc += g(i, j);
        out(i, j) += acc;
      }
    }
  });
}

Var increment_logits_rows(Var logp) {
  Tape& t = *logp.tape;
  const int pl = logp.id;
  const Mat& lp = t.val(logp);
  Mat y = Mat::Zero(lp.rows(), lp.cols());
  for (Eigen::Index i = 0; i < lp.rows(); ++i)
    for (Eigen::Index j = 0; j + 1 < lp.cols(); ++j) y(i, j) = lp(i, j) - lp(i, j + 1);
  return t.emit(std::move(y), {pl}, [pl](Tape& t, int self) {
    if (!t.needs_grad(pl)) return;
    const Mat& g = t.grad_ref(self);
    Mat& out = t.grad_ref(pl);
    const Eigen::Index m = g.cols();
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j + 1 < m) out(i, j) += g(i, j);
        if (j > 0) out(i, j) -= g(i, j - 1);
      }
  });
}

Var nll_rows(Var z, std::vector<LossTarget> targets) {
  Tape& t = *z.tape;
  const int pz = z.id;
  const Mat& zv = t.val(z);
  assert(static_cast<Eigen::Index>(targets.size()) == zv.rows());
  Mat y(zv.rows(), 1);
  for (Eigen::Index i = 0; i < zv.rows(); ++i) {
    const Vec zi = zv.row(i).transpose();
    y(i, 0) = targets[i].observed ? mtlr::uncensored_nll(zi, targets[i].bin)
                                  : mtlr::censored_nll(zi, targets[i].bin);
  }
  return t.emit(std::move(y), {pz},
                [pz, targets = std::move(targets)](Tape& t, int self) {
                  if (!t.needs_grad(pz)) return;
                  const Mat& g = t.grad_ref(self);
                  const Mat& zv = t.val(pz);
                  Mat& out = t.grad_ref(pz);
                  for (Eigen::Index i = 0; i < zv.rows(); ++i) {
                    const Vec zi = zv.row(i).transpose();
                    const Vec gi = targets[i].observed
                                       ? mtlr::uncensored_nll_grad(zi, targets[i].bin)
                                       : mtlr::censored_nll_grad(zi, targets[i].bin);
                    out.row(i) += g(i, 0) * gi.transpose();
                  }
                });
}

Var constrain_warp_rows(Var raw6) {
  Tape& t = *raw6.tape;
  const int pr = raw6.id;
  const Mat& raw = t.val(raw6);
  assert(raw.cols() == 6);
  Mat y(raw.rows(), 6);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const warp::WarpParams p = warp::constrain(raw.row(i).transpose());
    y.row(i) << p.w1, p.w2, p.a1, p.a2, p.c1, p.c2;
  }
  return t.emit(std::move(y), {pr}, [pr](Tape& t, int self) {
    if (!t.needs_grad(pr)) return;
    const Mat& g = t.grad_ref(self);
    const Mat& raw = t.val(pr);
    Mat& out = t.grad_ref(pr);
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      const auto J = warp::constrain_jacobian(raw.row(i).transpose());
      out.row(i) += g.row(i) * J;
    }
  });
}

Var warp_inverse_rows(Var theta6, const Vec& grid) {
  Tape& t = *theta6.tape;
  const int pt = theta6.id;
  const Mat& th = t.val(theta6);
  assert(th.cols() == 6);
  const int m = static_cast<int>(grid.size());
  Mat tau(th.rows(), m);
  for (Eigen::Index i = 0; i < th.rows(); ++i) {
    const warp::WarpParams p{th(i, 0), th(i, 1), th(i, 2), th(i, 3), th(i, 4), th(i, 5)};
    for (int j = 0; j < m; ++j) tau(i, j) = warp::inverse(grid[j], p);
  }
  return t.emit(std::move(tau), {pt}, [pt](Tape& t, int self) {
    if (!t.needs_grad(pt)) return;
    const Mat& g = t.grad_ref(self);
    const Mat& th = t.val(pt);
    const Mat& tau = t.val(self);
    Mat& out = t.grad_ref(pt);
    for (Eigen::Index i = 0; i < th.rows(); ++i) {
      const warp::WarpParams p{th(i, 0), th(i, 1), th(i, 2), th(i, 3), th(i, 4), th(i, 5)};
      for (Eigen::Index j = 0; j < tau.cols(); ++j) {
        const double gj = g(i, j);
        if (gj == 0.0) continue;
        const auto pg =
            warp::inverse_param_grads(tau(i, j), p, &t.warp_flat_warnings_);
        out(i, 0) += gj * pg.w1;
        out(i, 1) += gj * pg.w2;
        out(i, 2) += gj * pg.a1;
        out(i, 3) += gj * pg.a2;
        out(i, 4) += gj * pg.c1;
        out(i, 5) += gj * pg.c2;
      }
    }
  });
}

Var interp_rows(Var proto_row, Var u) {
  Tape& t = *proto_row.tape;
  const int pp = proto_row.id, pu = u.id;
  const Mat& proto = t.val(proto_row);
  assert(proto.rows() == 1);
  const int m = static_cast<int>(proto.cols());
  const Mat& uv = t.val(u);
  Mat y(uv.rows(), uv.cols());
  for (Eigen::Index i = 0; i < uv.rows(); ++i)
    for (Eigen::Index j = 0; j < uv.cols(); ++j) {
      const LerpCell c = lerp_cell(uv(i, j), m);
      y(i, j) = (1.0 - c.frac) * proto(0, c.i0) + c.frac * proto(0, c.i1);
    }
  return t.emit(std::move(y), {pp, pu}, [pp, pu, m](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    const Mat& proto = t.val(pp);
    const Mat& uv = t.val(pu);
    for (Eigen::Index i = 0; i < uv.rows(); ++i)
      for (Eigen::Index j = 0; j < uv.cols(); ++j) {
        const double gj = g(i, j);
        if (gj == 0.0) continue;
        const LerpCell c = lerp_cell(uv(i, j), m);
        if (t.needs_grad(pp)) {
          Mat& dp = t.grad_ref(pp);
          dp(0, c.i0) += gj * (1.0 - c.frac);
          dp(0, c.i1) += gj * c.frac;
        }
        if (t.needs_grad(pu))
          t.grad_ref(pu)(i, j) += gj * (proto(0, c.i1) - proto(0, c.i0));
      }
  });
}

}  // namespace survmoe::ad
