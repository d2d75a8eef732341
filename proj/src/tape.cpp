#include "dplan/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace dplan {

const Mat& Var::value() const {
  if (!tape_) throw std::logic_error("use of empty Var");
  return tape_->value(*this);
}

int Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ < 0 ||
      v.id_ >= static_cast<int>(nodes_.size())) {
    throw std::logic_error("Var does not belong to this tape");
  }
  return v.id_;
}

int Tape::push(Mat value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::gref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_set) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad_set = true;
  }
  return n.grad;
}

Var Tape::input(Mat value, bool requires_grad) {
  return Var(this, push(std::move(value), requires_grad));
}

Var Tape::constant_scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

#define DPLAN_NODE(vid, a_req, body)                          \
  const bool req__ = (a_req);                                 \
  const int vid = push(std::move(out__), req__);              \
  if (req__) nodes_[static_cast<std::size_t>(vid)].back = body

Var Tape::matmul(Var a, Var b) {
  const int ai = check(a), bi = check(b);
  const Mat& A = nodes_[ai].value;
  const Mat& B = nodes_[bi].value;
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul shape");
  Mat out__ = A * B;
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[bi].needs_grad, ([this, id, ai, bi] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) gref(ai).noalias() += g * nodes_[bi].value.transpose();
    if (nodes_[bi].needs_grad) gref(bi).noalias() += nodes_[ai].value.transpose() * g;
  }));
  return Var(this, id);
}

Var Tape::matmul_nt(Var a, Var b) {
  const int ai = check(a), bi = check(b);
  const Mat& A = nodes_[ai].value;
  const Mat& B = nodes_[bi].value;
  if (A.cols() != B.cols()) throw std::invalid_argument("matmul_nt shape");
  Mat out__ = A * B.transpose();
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[bi].needs_grad, ([this, id, ai, bi] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) gref(ai).noalias() += g * nodes_[bi].value;
    if (nodes_[bi].needs_grad) gref(bi).noalias() += g.transpose() * nodes_[ai].value;
  }));
  return Var(this, id);
}

Var Tape::add(Var a, Var b) {
  const int ai = check(a), bi = check(b);
  if (nodes_[ai].value.rows() != nodes_[bi].value.rows() ||
      nodes_[ai].value.cols() != nodes_[bi].value.cols()) {
    throw std::invalid_argument("add shape");
  }
  Mat out__ = nodes_[ai].value + nodes_[bi].value;
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[bi].needs_grad, ([this, id, ai, bi] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) gref(ai) += g;
    if (nodes_[bi].needs_grad) gref(bi) += g;
  }));
  return Var(this, id);
}

Var Tape::sub(Var a, Var b) {
  const int ai = check(a), bi = check(b);
  Mat out__ = nodes_[ai].value - nodes_[bi].value;
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[bi].needs_grad, ([this, id, ai, bi] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) gref(ai) += g;
    if (nodes_[bi].needs_grad) gref(bi) -= g;
  }));
  return Var(this, id);
}

Var Tape::cmul(Var a, Var b) {
  const int ai = check(a), bi = check(b);
  Mat out__ = nodes_[ai].value.cwiseProduct(nodes_[bi].value);
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[bi].needs_grad, ([this, id, ai, bi] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) gref(ai) += g.cwiseProduct(nodes_[bi].value);
    if (nodes_[bi].needs_grad) gref(bi) += g.cwiseProduct(nodes_[ai].value);
  }));
  return Var(this, id);
}

Var Tape::scale(Var a, double c) {
  const int ai = check(a);
  Mat out__ = nodes_[ai].value * c;
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai, c] {
    gref(ai) += nodes_[id].grad * c;
  }));
  return Var(this, id);
}

Var Tape::add_const(Var a, const Mat& c) {
  const int ai = check(a);
  Mat out__ = nodes_[ai].value + c;
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai] {
    gref(ai) += nodes_[id].grad;
  }));
  return Var(this, id);
}

Var Tape::add_rowvec(Var a, Var row) {
  const int ai = check(a), ri = check(row);
  if (nodes_[ri].value.rows() != 1 ||
      nodes_[ri].value.cols() != nodes_[ai].value.cols()) {
    throw std::invalid_argument("add_rowvec shape");
  }
  Mat out__ = nodes_[ai].value.rowwise() + nodes_[ri].value.row(0);
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[ri].needs_grad, ([this, id, ai, ri] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) gref(ai) += g;
    if (nodes_[ri].needs_grad) gref(ri) += g.colwise().sum();
  }));
  return Var(this, id);
}

Var Tape::mul_rowvec(Var a, Var row) {
  const int ai = check(a), ri = check(row);
  if (nodes_[ri].value.rows() != 1 ||
      nodes_[ri].value.cols() != nodes_[ai].value.cols()) {
    throw std::invalid_argument("mul_rowvec shape");
  }
  Mat out__ = nodes_[ai].value.array().rowwise() *
              nodes_[ri].value.row(0).array();
  DPLAN_NODE(id, nodes_[ai].needs_grad || nodes_[ri].needs_grad, ([this, id, ai, ri] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[ai].needs_grad) {
      gref(ai).array() += g.array().rowwise() * nodes_[ri].value.row(0).array();
    }
    if (nodes_[ri].needs_grad) {
      gref(ri) += g.cwiseProduct(nodes_[ai].value).colwise().sum();
    }
  }));
  return Var(this, id);
}

Var Tape::modulate(Var x, Var scale_row, Var shift_row) {
  const int xi = check(x), si = check(scale_row), bi = check(shift_row);
  const Mat& X = nodes_[xi].value;
  if (nodes_[si].value.rows() != 1 || nodes_[bi].value.rows() != 1 ||
      nodes_[si].value.cols() != X.cols() ||
      nodes_[bi].value.cols() != X.cols()) {
    throw std::invalid_argument("modulate shape");
  }
  Mat out__ =
      (X.array().rowwise() * (nodes_[si].value.row(0).array() + 1.0))
          .rowwise() +
      nodes_[bi].value.row(0).array();
  DPLAN_NODE(id,
             nodes_[xi].needs_grad || nodes_[si].needs_grad || nodes_[bi].needs_grad,
             ([this, id, xi, si, bi] {
    const Mat& g = nodes_[id].grad;
    if (nodes_[xi].needs_grad) {
      gref(xi).array() +=
          g.array().rowwise() * (nodes_[si].value.row(0).array() + 1.0);
    }
    if (nodes_[si].needs_grad) {
      gref(si) += g.cwiseProduct(nodes_[xi].value).colwise().sum();
    }
    if (nodes_[bi].needs_grad) gref(bi) += g.colwise().sum();
  }));
  return Var(this, id);
}

Var Tape::silu(Var a) {
  const int ai = check(a);
  const Mat& X = nodes_[ai].value;
  Mat sig = (1.0 + (-X.array()).exp()).inverse();
  Mat out__ = X.cwiseProduct(sig);
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai, sig = std::move(sig)] {
    const Mat& g = nodes_[id].grad;
    const Mat& X = nodes_[ai].value;
    gref(ai).array() +=
        g.array() * sig.array() * (1.0 + X.array() * (1.0 - sig.array()));
  }));
  return Var(this, id);
}

Var Tape::softmax_rows(Var a) {
  const int ai = check(a);
  const Mat& X = nodes_[ai].value;
  Mat out__(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    Eigen::ArrayXd e = (X.row(r).array() - m).exp();
    out__.row(r) = e / e.sum();
  }
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai] {
    const Mat& g = nodes_[id].grad;
    const Mat& y = nodes_[id].value;
    Mat& ga = gref(ai);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).cwiseProduct(y.row(r)).sum();
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  }));
  return Var(this, id);
}

Var Tape::layernorm_rows(Var a) {
  constexpr double kEps = 1e-6;
  const int ai = check(a);
  const Mat& X = nodes_[ai].value;
  const Eigen::Index C = X.cols();
  Mat out__(X.rows(), C);
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var =
        (X.row(r).array() - mu).square().sum() / static_cast<double>(C);
    inv_std(r) = 1.0 / std::sqrt(var + kEps);
    out__.row(r) = (X.row(r).array() - mu) * inv_std(r);
  }
  DPLAN_NODE(id, nodes_[ai].needs_grad,
             ([this, id, ai, inv_std = std::move(inv_std)] {
    const Mat& g = nodes_[id].grad;
    const Mat& y = nodes_[id].value;
    Mat& ga = gref(ai);
    const double C = static_cast<double>(y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double gmean = g.row(r).mean();
      const double gymean = g.row(r).cwiseProduct(y.row(r)).sum() / C;
      ga.row(r).array() +=
          inv_std(r) * (g.row(r).array() - gmean - y.row(r).array() * gymean);
    }
  }));
  return Var(this, id);
}

Var Tape::rows(Var a, int r0, int n) {
  const int ai = check(a);
  const Mat& X = nodes_[ai].value;
  if (r0 < 0 || n < 1 || r0 + n > X.rows()) {
    throw std::invalid_argument("rows slice out of range");
  }
  Mat out__ = X.middleRows(r0, n);
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai, r0, n] {
    gref(ai).middleRows(r0, n) += nodes_[id].grad;
  }));
  return Var(this, id);
}

Var Tape::cols(Var a, int c0, int n) {
  const int ai = check(a);
  const Mat& X = nodes_[ai].value;
  if (c0 < 0 || n < 1 || c0 + n > X.cols()) {
    throw std::invalid_argument("cols slice out of range");
  }
  Mat out__ = X.middleCols(c0, n);
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai, c0, n] {
    gref(ai).middleCols(c0, n) += nodes_[id].grad;
  }));
  return Var(this, id);
}

Var Tape::vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat needs parts");
  std::vector<int> ids;
  Eigen::Index total = 0;
  bool req = false;
  const Eigen::Index C = nodes_[check(parts[0])].value.cols();
  for (Var p : parts) {
    const int pi = check(p);
    if (nodes_[pi].value.cols() != C) throw std::invalid_argument("vcat width");
    ids.push_back(pi);
    total += nodes_[pi].value.rows();
    req = req || nodes_[pi].needs_grad;
  }
  Mat out__(total, C);
  Eigen::Index r = 0;
  for (int pi : ids) {
    out__.middleRows(r, nodes_[pi].value.rows()) = nodes_[pi].value;
    r += nodes_[pi].value.rows();
  }
  DPLAN_NODE(id, req, ([this, id, ids = std::move(ids)] {
    const Mat& g = nodes_[id].grad;
    Eigen::Index r = 0;
    for (int pi : ids) {
      const Eigen::Index nr = nodes_[pi].value.rows();
      if (nodes_[pi].needs_grad) gref(pi) += g.middleRows(r, nr);
      r += nr;
    }
  }));
  return Var(this, id);
}

Var Tape::hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat needs parts");
  std::vector<int> ids;
  Eigen::Index total = 0;
  bool req = false;
  const Eigen::Index R = nodes_[check(parts[0])].value.rows();
  for (Var p : parts) {
    const int pi = check(p);
    if (nodes_[pi].value.rows() != R) throw std::invalid_argument("hcat height");
    ids.push_back(pi);
    total += nodes_[pi].value.cols();
    req = req || nodes_[pi].needs_grad;
  }
  Mat out__(R, total);
  Eigen::Index c = 0;
  for (int pi : ids) {
    out__.middleCols(c, nodes_[pi].value.cols()) = nodes_[pi].value;
    c += nodes_[pi].value.cols();
  }
  DPLAN_NODE(id, req, ([this, id, ids = std::move(ids)] {
    const Mat& g = nodes_[id].grad;
    Eigen::Index c = 0;
    for (int pi : ids) {
      const Eigen::Index nc = nodes_[pi].value.cols();
      if (nodes_[pi].needs_grad) gref(pi) += g.middleCols(c, nc);
      c += nc;
    }
  }));
  return Var(this, id);
}

Var Tape::clamp(Var a, double lo, double hi) {
  const int ai = check(a);
  Mat out__ = nodes_[ai].value.cwiseMax(lo).cwiseMin(hi);
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai, lo, hi] {
    const Mat& g = nodes_[id].grad;
    const Mat& X = nodes_[ai].value;
    gref(ai).array() +=
        g.array() *
        ((X.array() > lo) && (X.array() < hi)).cast<double>();
  }));
  return Var(this, id);
}

Var Tape::mean_rows(Var a) {
  const int ai = check(a);
  const Mat& X = nodes_[ai].value;
  Mat out__ = X.colwise().mean();
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai] {
    const Mat& g = nodes_[id].grad;
    const double inv = 1.0 / static_cast<double>(nodes_[ai].value.rows());
    gref(ai) += (g * inv).replicate(nodes_[ai].value.rows(), 1);
  }));
  return Var(this, id);
}

Var Tape::sum(Var a) {
  const int ai = check(a);
  Mat out__(1, 1);
  out__(0, 0) = nodes_[ai].value.sum();
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai] {
    gref(ai).array() += nodes_[id].grad(0, 0);
  }));
  return Var(this, id);
}

Var Tape::sum_sq(Var a) {
  const int ai = check(a);
  Mat out__(1, 1);
  out__(0, 0) = nodes_[ai].value.squaredNorm();
  DPLAN_NODE(id, nodes_[ai].needs_grad, ([this, id, ai] {
    gref(ai) += 2.0 * nodes_[id].grad(0, 0) * nodes_[ai].value;
  }));
  return Var(this, id);
}

#undef DPLAN_NODE

void Tape::backward(Var scalar_loss) {
  const int li = check(scalar_loss);
  if (nodes_[li].value.rows() != 1 || nodes_[li].value.cols() != 1) {
    throw std::invalid_argument("backward needs a 1x1 loss");
  }
  if (swept_) throw std::logic_error("tape already swept");
  swept_ = true;
  gref(li)(0, 0) = 1.0;
  for (int i = li; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back && n.grad_set) n.back();
  }
}

Mat Tape::grad(Var v) const {
  const int id = check(v);
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_set) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace dplan
