#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace takead::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Wraps to (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

// Expresses a world point in the frame at `origin` with `heading` (x forward, y left).
inline Vec2 to_local(Vec2 p, Vec2 origin, double heading) {
  const Vec2 d = p - origin;
  const double c = std::cos(heading), s = std::sin(heading);
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

inline Vec2 to_world(Vec2 local, Vec2 origin, double heading) {
  const double c = std::cos(heading), s = std::sin(heading);
  return {origin.x + c * local.x - s * local.y, origin.y + s * local.x + c * local.y};
}

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 1.0;
  double width = 1.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 f = unit(heading) * (0.5 * length);
    const Vec2 l = unit(heading + 0.5 * std::numbers::pi) * (0.5 * width);
    return {center + f + l, center + f - l, center - f - l, center - f + l};
  }
};

// Separating-axis test for two oriented rectangles. Touching edges count as
// no overlap.
inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes{unit(a.heading), unit(a.heading + 0.5 * std::numbers::pi), unit(b.heading),
                                 unit(b.heading + 0.5 * std::numbers::pi)};
  for (const Vec2& ax : axes) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (const Vec2& p : ca) {
      const double d = p.dot(ax);
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (const Vec2& p : cb) {
      const double d = p.dot(ax);
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    if (amax <= bmin || bmax <= amin) return false;
  }
  return true;
}

struct Projection {
  double s = 0.0;        // arc length of the closest point
  double lateral = 0.0;  // signed offset, positive to the left of travel
  std::size_t segment = 0;
};

// Polyline parameterized by arc length. Beyond either end the first/last
// segment is extended linearly.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
    if (pts_.size() < 2) throw std::invalid_argument("polyline needs at least two points");
    cum_.assign(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      const double d = (pts_[i] - pts_[i - 1]).norm();
      if (!(d > 0.0)) throw std::invalid_argument("polyline waypoints " + std::to_string(i - 1) + " and " +
                                                  std::to_string(i) + " coincide");
      cum_[i] = cum_[i - 1] + d;
    }
  }

  const std::vector<Vec2>& points() const { return pts_; }
  std::size_t segment_count() const { return pts_.empty() ? 0 : pts_.size() - 1; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  double segment_start(std::size_t i) const { return cum_[i]; }

  std::size_t segment_at(double s) const {
    if (s <= 0.0) return 0;
    if (s >= length()) return segment_count() - 1;
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    return static_cast<std::size_t>(std::distance(cum_.begin(), it)) - 1;
  }

  double segment_heading(std::size_t i) const {
    const Vec2 d = pts_[i + 1] - pts_[i];
    return std::atan2(d.y, d.x);
  }

  Vec2 point_at(double s) const {
    const std::size_t i = segment_at(s);
    const Vec2 a = pts_[i], b = pts_[i + 1];
    const double seg = cum_[i + 1] - cum_[i];
    return a + (b - a) * ((s - cum_[i]) / seg);
  }

  double heading_at(double s) const { return segment_heading(segment_at(s)); }

  // Closest point restricted to arc lengths in [s_lo, s_hi]; the end
  // segments extend past the polyline ends.
  Projection project(Vec2 p, double s_lo = -std::numeric_limits<double>::infinity(),
                     double s_hi = std::numeric_limits<double>::infinity()) const {
    Projection best;
    double best_d2 = std::numeric_limits<double>::infinity();
    const std::size_t i0 = segment_at(s_lo), i1 = segment_at(s_hi);
    for (std::size_t i = i0; i <= i1; ++i) {
      const Vec2 a = pts_[i], b = pts_[i + 1];
      const Vec2 ab = b - a;
      const double seg = cum_[i + 1] - cum_[i];
      double t = (p - a).dot(ab) / (seg * seg);
      const double lo = (i == 0) ? -std::numeric_limits<double>::infinity() : 0.0;
      const double hi = (i + 1 == segment_count()) ? std::numeric_limits<double>::infinity() : 1.0;
      t = std::clamp(t, lo, hi);
      double s = cum_[i] + t * seg;
      if (s < s_lo) {
        s = s_lo;
        t = (s - cum_[i]) / seg;
      } else if (s > s_hi) {
        s = s_hi;
        t = (s - cum_[i]) / seg;
      }
      const Vec2 q = a + ab * t;
      const double d2 = (p - q).dot(p - q);
      if (d2 < best_d2) {
        best_d2 = d2;
        best.s = s;
        best.segment = i;
        best.lateral = ab.cross(p - a) / seg;
      }
    }
    return best;
  }

  // Heading change per meter, estimated over a +-1 m window.
  double curvature_at(double s) const {
    const double h0 = heading_at(s - 1.0), h1 = heading_at(s + 1.0);
    return std::abs(normalize_angle(h1 - h0)) / 2.0;
  }

 private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

}  // namespace takead::sim
