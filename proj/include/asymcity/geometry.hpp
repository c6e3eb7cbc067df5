#pragma once

#include <optional>
#include <span>
#include <vector>

namespace asymcity {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);

using Polygon = std::vector<Vec2>;

/// Positive for counter-clockwise vertex order.
double signed_area(std::span<const Vec2> poly);
Vec2 centroid(std::span<const Vec2> poly);
bool is_simple(std::span<const Vec2> poly);

bool on_segment(Vec2 p, Vec2 a, Vec2 b);
/// True when p lies strictly inside the polygon (boundary points are outside).
bool strictly_inside(Vec2 p, std::span<const Vec2> poly);
/// Closed-segment intersection test.
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

/// Distance along the ray origin + t*dir (t >= 0) to the closed segment [a, b].
/// `dir` need not be normalized; t is in units of |dir|. Collinear overlap
/// reports the nearest overlapping point.
std::optional<double> ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b);

}  // namespace asymcity
