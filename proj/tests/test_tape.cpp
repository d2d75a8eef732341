#include <doctest.h>

#include <cmath>

#include "dplan/rng.hpp"
#include "dplan/tape.hpp"

using namespace dplan;

namespace {

Mat random_mat(int r, int c, RngStream& rng, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

// Central finite differences of a scalar tape program with respect to one
// input matrix.
template <typename BuildFn>
void check_grad(const Mat& x0, BuildFn build, double tol = 1e-6) {
  Tape t;
  Var x = t.input(x0);
  Var loss = build(t, x);
  t.backward(loss);
  const Mat analytic = t.grad(x);

  const double h = 1e-6;
  for (int i = 0; i < x0.rows(); ++i) {
    for (int j = 0; j < x0.cols(); ++j) {
      Mat xp = x0, xm = x0;
      xp(i, j) += h;
      xm(i, j) -= h;
      Tape tp, tm;
      const double lp = build(tp, tp.input(xp)).value()(0, 0);
      const double lm = build(tm, tm.input(xm)).value()(0, 0);
      const double fd = (lp - lm) / (2.0 * h);
      CHECK(analytic(i, j) == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("tape matmul forward and gradient") {
  RngStream rng(1);
  Mat a = random_mat(3, 4, rng);
  Mat b = random_mat(4, 5, rng);
  {
    Tape t;
    Var va = t.input(a);
    Var vb = t.input(b);
    Var c = t.matmul(va, vb);
    CHECK((c.value() - a * b).cwiseAbs().maxCoeff() == 0.0);
    Var loss = t.sum_sq(c);
    t.backward(loss);
    const Mat ga = t.grad(va);
    const Mat expected_ga = 2.0 * (a * b) * b.transpose();
    CHECK((ga - expected_ga).cwiseAbs().maxCoeff() < 1e-12);
  }
  check_grad(a, [&](Tape& t, Var x) {
    return t.sum_sq(t.matmul(x, t.constant(b)));
  });
}

TEST_CASE("tape elementwise and broadcast gradients") {
  RngStream rng(2);
  Mat a = random_mat(4, 6, rng);
  Mat row = random_mat(1, 6, rng);

  check_grad(a, [&](Tape& t, Var x) {
    return t.sum_sq(t.add_rowvec(x, t.constant(row)));
  });
  check_grad(row, [&](Tape& t, Var r) {
    return t.sum_sq(t.add_rowvec(t.constant(a), r));
  });
  check_grad(a, [&](Tape& t, Var x) {
    return t.sum_sq(t.mul_rowvec(x, t.constant(row)));
  });
  check_grad(row, [&](Tape& t, Var r) {
    return t.sum_sq(t.mul_rowvec(t.constant(a), r));
  });
  check_grad(a, [&](Tape& t, Var x) {
    return t.sum_sq(t.cmul(x, t.constant(Mat(a.array() * 0.5 + 1.0))));
  });
  check_grad(row, [&](Tape& t, Var r) {
    return t.sum_sq(t.modulate(t.constant(a), r, t.constant(row)));
  });
  check_grad(row, [&](Tape& t, Var r) {
    return t.sum_sq(t.modulate(t.constant(a), t.constant(row), r));
  });
}

TEST_CASE("tape nonlinearity gradients") {
  RngStream rng(3);
  Mat a = random_mat(5, 7, rng);
  check_grad(a, [&](Tape& t, Var x) { return t.sum_sq(t.silu(x)); });
  check_grad(a, [&](Tape& t, Var x) { return t.sum_sq(t.softmax_rows(x)); });
  check_grad(a, [&](Tape& t, Var x) { return t.sum_sq(t.layernorm_rows(x)); },
             1e-4);
  const Mat weights = random_mat(5, 7, rng);
  check_grad(a, [&](Tape& t, Var x) {
    return t.sum(t.cmul(t.softmax_rows(x), t.constant(weights)));
  });
}

TEST_CASE("tape slicing and concatenation gradients") {
  RngStream rng(4);
  Mat a = random_mat(6, 8, rng);
  check_grad(a, [&](Tape& t, Var x) { return t.sum_sq(t.rows(x, 1, 3)); });
  check_grad(a, [&](Tape& t, Var x) { return t.sum_sq(t.cols(x, 2, 4)); });
  check_grad(a, [&](Tape& t, Var x) {
    return t.sum_sq(t.vcat({t.rows(x, 0, 2), t.rows(x, 3, 2)}));
  });
  check_grad(a, [&](Tape& t, Var x) {
    return t.sum_sq(t.hcat({t.cols(x, 0, 3), t.cols(x, 5, 2)}));
  });
  check_grad(a, [&](Tape& t, Var x) { return t.sum_sq(t.mean_rows(x)); });
}

TEST_CASE("tape clamp passes gradient only inside the interval") {
  Mat a(1, 3);
  a << -2.0, 0.3, 2.0;
  Tape t;
  Var x = t.input(a);
  Var y = t.clamp(x, -1.0, 1.0);
  CHECK(y.value()(0, 0) == -1.0);
  CHECK(y.value()(0, 1) == doctest::Approx(0.3));
  CHECK(y.value()(0, 2) == 1.0);
  t.backward(t.sum(y));
  const Mat g = t.grad(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(0, 2) == 0.0);
}

TEST_CASE("tape constants block gradient flow") {
  Tape t;
  Var c = t.constant(Mat::Ones(2, 2));
  Var x = t.input(Mat::Ones(2, 2));
  Var y = t.add(t.cmul(x, c), c);
  t.backward(t.sum(y));
  CHECK(t.grad(x).sum() == doctest::Approx(4.0));
  CHECK(t.grad(c).sum() == 0.0);
  CHECK(!t.requires_grad(c));
}

TEST_CASE("tape gradient accumulates over reused nodes") {
  Mat a(1, 1);
  a << 3.0;
  Tape t;
  Var x = t.input(a);
  Var y = t.cmul(x, x);  // x^2
  t.backward(t.sum(y));
  CHECK(t.grad(x)(0, 0) == doctest::Approx(6.0));
}
