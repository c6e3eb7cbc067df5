#include "asymcity/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace asymcity {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

double signed_area(std::span<const Vec2> poly) {
  double twice = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    twice += cross(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * twice;
}

Vec2 centroid(std::span<const Vec2> poly) {
  double twice_area = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2 p = poly[i];
    const Vec2 q = poly[(i + 1) % n];
    const double w = cross(p, q);
    twice_area += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  if (twice_area == 0.0) {
    Vec2 mean;
    for (Vec2 p : poly) mean = mean + p;
    return (1.0 / static_cast<double>(poly.size())) * mean;
  }
  return {cx / (3.0 * twice_area), cy / (3.0 * twice_area)};
}

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  if (cross(b - a, p - a) != 0.0) return false;
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool strictly_inside(Vec2 p, std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if (on_segment(p, a, b)) return false;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

}  // namespace

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(c, a, b)) return true;
  if (o2 == 0 && on_segment(d, a, b)) return true;
  if (o3 == 0 && on_segment(a, c, d)) return true;
  if (o4 == 0 && on_segment(b, c, d)) return true;
  return false;
}

bool is_simple(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (poly[i] == poly[(i + 1) % n]) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        return false;
      }
    }
  }
  return signed_area(poly) != 0.0;
}

std::optional<double> ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 edge = b - a;
  const Vec2 to_a = a - origin;
  const double denom = cross(dir, edge);
  if (denom != 0.0) {
    const double t = cross(to_a, edge) / denom;
    const double u = cross(to_a, dir) / denom;
    if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
    return std::nullopt;
  }
  if (cross(to_a, dir) != 0.0) return std::nullopt;  // parallel, not collinear
  const double len2 = dot(dir, dir);
  const double ta = dot(to_a, dir) / len2;
  const double tb = dot(b - origin, dir) / len2;
  const double hi = std::max(ta, tb);
  if (hi < 0.0) return std::nullopt;
  return std::max(0.0, std::min(ta, tb));
}

}  // namespace asymcity
