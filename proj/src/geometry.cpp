#include "dplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dplan {

namespace {
constexpr double kPi = std::numbers::pi;
}

double Vec2::norm() const { return std::hypot(x, y); }

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

double angle_diff(double a, double b) { return wrap_angle(a - b); }

double interp_heading(double h0, double h1, double frac) {
  return wrap_angle(h0 + frac * angle_diff(h1, h0));
}

std::array<Vec2, 4> OrientedRect::corners() const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  auto corner = [&](double dx, double dy) {
    return Vec2{center.x + c * dx - s * dy, center.y + s * dx + c * dy};
  };
  return {corner(hl, hw), corner(hl, -hw), corner(-hl, -hw), corner(-hl, hw)};
}

namespace {

// Projection interval of a rectangle onto a unit axis.
void project_rect(const std::array<Vec2, 4>& corners, const Vec2& axis,
                  double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (const Vec2& c : corners) {
    const double v = c.dot(axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
}

double sat_margin(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes = {
      Vec2{std::cos(a.heading), std::sin(a.heading)},
      Vec2{-std::sin(a.heading), std::cos(a.heading)},
      Vec2{std::cos(b.heading), std::sin(b.heading)},
      Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  double margin = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : axes) {
    double alo, ahi, blo, bhi;
    project_rect(ca, axis, alo, ahi);
    project_rect(cb, axis, blo, bhi);
    // Overlap length along this axis (negative = gap).
    margin = std::min(margin, std::min(ahi, bhi) - std::max(alo, blo));
  }
  return margin;
}

}  // namespace

bool rects_overlap(const OrientedRect& a, const OrientedRect& b) {
  return sat_margin(a, b) > 0.0;
}

double rect_overlap_margin(const OrientedRect& a, const OrientedRect& b) {
  return sat_margin(a, b);
}

bool point_in_rect(const Vec2& p, const OrientedRect& r) {
  const double c = std::cos(r.heading);
  const double s = std::sin(r.heading);
  const Vec2 d = p - r.center;
  const double lx = c * d.x + s * d.y;
  const double ly = -s * d.x + c * d.y;
  return std::abs(lx) < 0.5 * r.length && std::abs(ly) < 0.5 * r.width;
}

double Polygon::area() const {
  double acc = 0.0;
  const std::size_t n = pts_.size();
  for (std::size_t i = 0; i < n; ++i) {
    acc += pts_[i].cross(pts_[(i + 1) % n]);
  }
  return 0.5 * std::abs(acc);
}

bool Polygon::contains(const Vec2& p, double boundary_eps) const {
  const std::size_t n = pts_.size();
  if (n < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    if (dist_point_segment(p, pts_[i], pts_[(i + 1) % n]) <= boundary_eps) {
      return true;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = pts_[i];
    const Vec2& b = pts_[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

namespace {

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = (q - p).cross(r - p);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  const int o1 = orient(a, b, c);
  const int o2 = orient(a, b, d);
  const int o3 = orient(c, d, a);
  const int o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) {
    return true;
  }
  return false;
}

}  // namespace

bool Polygon::is_simple() const {
  const std::size_t n = pts_.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (they share a vertex).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(pts_[i], pts_[(i + 1) % n], pts_[j],
                             pts_[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

Polyline::Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
  cum_.reserve(pts_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pts_.size(); ++i) {
    if (i > 0) s += (pts_[i] - pts_[i - 1]).norm();
    cum_.push_back(s);
  }
}

Vec2 Polyline::point_at(double s) const {
  if (pts_.empty()) throw std::invalid_argument("empty polyline");
  if (pts_.size() == 1 || s <= 0.0) return pts_.front();
  if (s >= cum_.back()) return pts_.back();
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cum_.begin());
  const double seg = cum_[i] - cum_[i - 1];
  const double f = seg > 0.0 ? (s - cum_[i - 1]) / seg : 0.0;
  return pts_[i - 1] + (pts_[i] - pts_[i - 1]) * f;
}

Vec2 Polyline::tangent_at(double s) const {
  if (pts_.size() < 2) throw std::invalid_argument("polyline needs 2 points");
  std::size_t i = 1;
  if (s >= cum_.back()) {
    i = pts_.size() - 1;
  } else if (s > 0.0) {
    i = static_cast<std::size_t>(
        std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin());
  }
  Vec2 d = pts_[i] - pts_[i - 1];
  const double n = d.norm();
  if (n <= 0.0) return {1.0, 0.0};
  return {d.x / n, d.y / n};
}

double Polyline::heading_at(double s) const {
  const Vec2 t = tangent_at(s);
  return std::atan2(t.y, t.x);
}

double Polyline::project(const Vec2& p) const {
  if (pts_.empty()) throw std::invalid_argument("empty polyline");
  if (pts_.size() == 1) return 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
    const Vec2 a = pts_[i];
    const Vec2 b = pts_[i + 1];
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double d2 = (p - q).dot(p - q);
    if (d2 < best_d2 - 1e-15) {
      best_d2 = d2;
      best_s = cum_[i] + std::sqrt(len2) * t;
    }
  }
  return best_s;
}

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

}  // namespace dplan
