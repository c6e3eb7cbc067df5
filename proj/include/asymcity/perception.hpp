#pragma once

// Geometric trajectory features: a vertical-openness isovist ("visibility
// ratio") and the signed turning angle at each vertex.

#include <optional>
#include <span>
#include <vector>

#include "asymcity/geometry.hpp"
#include "asymcity/morphology.hpp"

namespace asymcity {

struct PerceptionConfig {
  int n_rays = 36;
  double max_distance = 150.0;
  double eye_height = 1.6;
};

void validate(const PerceptionConfig& cfg);

struct FeatureVector {
  double visibility = 1.0;  // [0, 1]
  double curvature = 0.0;   // [-1, 1]

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using FeatureSequence = std::vector<FeatureVector>;

/// One occluding facade segment.
struct Facade {
  Vec2 a;
  Vec2 b;
  double height = 0.0;
  int building = 0;
};

struct RayHit {
  double distance = 0.0;
  double height = 0.0;
};

/// Closer hits win; equidistant hits resolve to the taller facade.
inline bool better_hit(const RayHit& candidate, const std::optional<RayHit>& best) {
  if (!best) return true;
  if (candidate.distance != best->distance) return candidate.distance < best->distance;
  return candidate.height > best->height;
}

std::vector<Facade> collect_facades(const City& city);

/// Openness of one ray given its nearest hit (1 when nothing is hit).
double ray_openness(const std::optional<RayHit>& hit, double eye_height);

/// Uniform-grid bucket index over facade segments with a DDA ray walk.
/// `cast` returns exactly what scanning every facade would return.
class FacadeIndex {
 public:
  explicit FacadeIndex(std::vector<Facade> facades);

  std::optional<RayHit> cast(Vec2 origin, Vec2 dir, double max_distance) const;
  std::span<const Facade> facades() const { return facades_; }

 private:
  std::vector<Facade> facades_;
  Vec2 lo_;
  Vec2 hi_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  double pad_ = 0.0;
  std::vector<std::vector<int>> cells_;
};

/// Precomputed acceleration structures for repeated visibility queries on
/// one city.
class VisibilityField {
 public:
  VisibilityField(const City& city, const PerceptionConfig& cfg);

  /// Throws DomainError when p lies inside a building.
  double ratio(Vec2 p) const;
  /// Index (into city.buildings) of the building whose interior contains
  /// p, or -1.
  int building_containing(Vec2 p) const;
  const PerceptionConfig& config() const { return cfg_; }

 private:
  struct Footprint {
    Polygon polygon;
    int id = 0;
    Vec2 lo;
    Vec2 hi;
  };
  PerceptionConfig cfg_;
  FacadeIndex index_;
  std::vector<Footprint> footprints_;
  std::vector<Vec2> directions_;
};

double visibility_ratio(Vec2 p, const City& city, const PerceptionConfig& cfg);

/// Signed turning angle at p normalized by pi; left turns positive, exact
/// reversal is +1.
double curvature(Vec2 p_prev, Vec2 p, Vec2 p_next);

FeatureSequence featurize_trajectory(std::span<const int> nodes, const City& city,
                                     const VisibilityField& field);
FeatureSequence featurize_trajectory(std::span<const int> nodes, const City& city,
                                     const PerceptionConfig& cfg);

struct ExposureMap {
  Vec2 origin;  // lower-left corner of the sampled box
  double step = 10.0;
  int nx = 0;
  int ny = 0;
  std::vector<std::optional<double>> values;  // row-major, row = y index; empty inside buildings

  Vec2 cell_center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * step, origin.y + (iy + 0.5) * step};
  }
  const std::optional<double>& at(int ix, int iy) const { return values[iy * nx + ix]; }
};

/// Bounding box of all street nodes and footprint vertices.
std::pair<Vec2, Vec2> city_bounds(const City& city);

ExposureMap exposure_map(const City& city, const PerceptionConfig& cfg, double grid_step = 10.0);

}  // namespace asymcity
