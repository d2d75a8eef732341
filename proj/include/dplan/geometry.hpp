#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace dplan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const;
};

// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

// Shortest signed arc from b to a, i.e. wrap_angle(a - b).
double angle_diff(double a, double b);

// Interpolate between two headings along the shortest arc.
double interp_heading(double h0, double h1, double frac);

struct OrientedRect {
  Vec2 center;
  double heading = 0.0;
  double length = 1.0;  // extent along heading
  double width = 1.0;   // extent across heading

  std::array<Vec2, 4> corners() const;
};

// Strict-interior separating-axis test: rectangles touching along an edge or
// at a corner do not count as overlapping.
bool rects_overlap(const OrientedRect& a, const OrientedRect& b);

// Signed penetration estimate from the SAT axes: positive means overlap depth,
// negative means separation gap along the best separating axis.
double rect_overlap_margin(const OrientedRect& a, const OrientedRect& b);

// Strictly inside (boundary excluded), used by the sampling oracle in tests.
bool point_in_rect(const Vec2& p, const OrientedRect& r);

class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> pts) : pts_(std::move(pts)) {}

  const std::vector<Vec2>& points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }
  double area() const;

  // Closed-polygon convention: points on the boundary (within eps) count as
  // contained.
  bool contains(const Vec2& p, double boundary_eps = 1e-9) const;

  // No self-intersections between non-adjacent edges and at least 3 vertices.
  bool is_simple() const;

 private:
  std::vector<Vec2> pts_;
};

class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> pts);

  const std::vector<Vec2>& points() const { return pts_; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  bool empty() const { return pts_.empty(); }

  Vec2 point_at(double s) const;
  // Unit tangent of the segment containing s.
  Vec2 tangent_at(double s) const;
  double heading_at(double s) const;

  // Arc length of the closest point on the polyline; ties keep the smallest s.
  double project(const Vec2& p) const;

 private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace dplan
