#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace dplan {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a tape node; cheap to copy, valid while its tape is alive.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Mat& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape over dense matrices. Nodes are appended in topological
// order, so the backward sweep is a single reverse pass; gradients flow only
// into nodes that require them. A tape is single-use: build, backward, read.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Mat value, bool requires_grad = true);
  Var constant(Mat value) { return input(std::move(value), false); }
  Var constant_scalar(double v);

  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_const(Var a, const Mat& c);
  Var add_rowvec(Var a, Var row);  // broadcast 1 x C over rows
  Var mul_rowvec(Var a, Var row);
  // x * (1 + scale) + shift, scale/shift broadcast over rows.
  Var modulate(Var x, Var scale_row, Var shift_row);
  Var silu(Var a);
  Var softmax_rows(Var a);
  Var layernorm_rows(Var a);  // parameter-free, eps 1e-6
  Var rows(Var a, int r0, int n);
  Var cols(Var a, int c0, int n);
  Var vcat(const std::vector<Var>& parts);
  Var hcat(const std::vector<Var>& parts);
  Var clamp(Var a, double lo, double hi);
  Var mean_rows(Var a);  // 1 x C column means
  Var sum(Var a);        // 1 x 1
  Var sum_sq(Var a);     // 1 x 1

  void backward(Var scalar_loss);

  const Mat& value(Var v) const { return nodes_[check(v)].value; }
  // Zero matrix if the node never received gradient.
  Mat grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[check(v)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    bool grad_set = false;
    std::function<void()> back;
  };

  int check(Var v) const;
  int push(Mat value, bool needs_grad);
  Mat& gref(int id);  // gradient accumulator, allocated zero on first touch

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace dplan
