#pragma once

// Reverse-mode tape over dense Eigen matrices. A Tape is built fresh per
// batch; ops append nodes in topological order and backward() walks them in
// reverse, accumulating gradients into parent nodes. Parameters are leaves
// tagged with a slot index so the optimizer can collect their gradients.
//
// The op set is deliberately small: dense linear algebra, elementwise
// nonlinearities, row-wise softmax bookkeeping, and three custom ops that
// carry hand-derived backward rules (the discrete-time survival loss, the
// warp-parameter constraint map, and the bisected warp inverse whose
// gradient comes from the implicit function theorem).

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "survmoe/common.hpp"

namespace survmoe::ad {

class Tape;

/// Lightweight handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Per-record loss target: event bin plus whether the event was observed.
struct LossTarget {
  int bin = 0;
  bool observed = true;
};

class Tape {
 public:
  Var constant(Mat value);
  Var param(Mat value, int slot);

  const Mat& val(int id) const { return nodes_[id].value; }
  const Mat& val(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  /// Gradient buffer of a node, allocated and zeroed on first touch.
  Mat& grad_ref(int id);

  /// Reverse sweep from a 1x1 root. One shot per tape.
  void backward(Var root);

  /// Adds each parameter node's gradient into sink[slot]; slots without a
  /// touched gradient contribute nothing.
  void accumulate_param_grads(std::vector<Mat>& sink) const;

  /// Count of near-flat warp gradient clamps seen during backward.
  int warp_flat_warnings() const { return warp_flat_warnings_; }

  // --- internals used by the op constructors ---
  using Pull = std::function<void(Tape&, int self)>;
  Var emit(Mat value, std::vector<int> parents, Pull pull);
  int size() const { return static_cast<int>(nodes_.size()); }
  int warp_flat_warnings_ = 0;

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::vector<int> parents;
    Pull pull;
    bool needs_grad = false;
    int slot = -1;
  };
  std::vector<Node> nodes_;
  bool swept_ = false;
};

// dense products
Var matmul(Var a, Var b);     // A * B
Var matmul_nt(Var a, Var b);  // A * B^T

// elementwise / broadcast arithmetic
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_rowvec(Var a, Var row);  // A + ones * row
Var cwise_mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var clamp_min(Var a, double floor);
Var log(Var a);

// row-wise reductions and normalizers
Var row_softmax(Var a);
Var row_normalize(Var a);  // divide each row by its sum
Var sum_all(Var a);        // 1x1
Var colwise_mean(Var a);   // 1 x cols

// shape plumbing
Var slice_cols(Var a, int col0, int ncols);
Var slice_rows(Var a, int row0, int nrows);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(Var table, std::vector<int> rows);

// scalar-node and column-vector broadcasting
Var div_by_scalar(Var a, Var s);   // s is 1x1
Var mul_colvec(Var a, Var col);    // col is rows x 1

// survival-likelihood pipeline
Var suffix_sum_rows(Var z);          // u_j = sum_{t >= j} z_t per row
Var increment_logits_rows(Var logp); // z_j = lp_j - lp_{j+1}, last entry 0
Var nll_rows(Var z, std::vector<LossTarget> targets);  // rows x 1

// warp pipeline (one expert at a time)
Var constrain_warp_rows(Var raw6);                     // rows x 6
Var warp_inverse_rows(Var theta6, const Vec& grid);    // rows x grid-size
Var interp_rows(Var proto_row, Var u);                 // fractional gather

}  // namespace survmoe::ad
