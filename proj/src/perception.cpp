#include "asymcity/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "asymcity/error.hpp"

namespace asymcity {

void validate(const PerceptionConfig& cfg) {
  if (cfg.n_rays < 4) throw ParameterError("n_rays", "must be >= 4");
  if (!(cfg.max_distance > 0.0)) throw ParameterError("max_distance", "must be > 0");
  if (!(cfg.eye_height >= 0.0)) throw ParameterError("eye_height", "must be >= 0");
}

std::vector<Facade> collect_facades(const City& city) {
  std::vector<Facade> out;
  for (const auto& b : city.buildings) {
    const std::size_t n = b.footprint.size();
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({b.footprint[i], b.footprint[(i + 1) % n], b.height, b.id});
    }
  }
  return out;
}

double ray_openness(const std::optional<RayHit>& hit, double eye_height) {
  if (!hit) return 1.0;
  const double phi = std::atan2(std::max(hit->height - eye_height, 0.0), hit->distance);
  return 1.0 - phi / (std::numbers::pi / 2.0);
}

FacadeIndex::FacadeIndex(std::vector<Facade> facades) : facades_(std::move(facades)) {
  if (facades_.empty()) return;
  lo_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  hi_ = {-lo_.x, -lo_.y};
  for (const auto& f : facades_) {
    lo_ = {std::min({lo_.x, f.a.x, f.b.x}), std::min({lo_.y, f.a.y, f.b.y})};
    hi_ = {std::max({hi_.x, f.a.x, f.b.x}), std::max({hi_.y, f.a.y, f.b.y})};
  }
  const double extent = std::max({hi_.x - lo_.x, hi_.y - lo_.y, 1.0});
  pad_ = 1e-9 * extent + 1e-9;
  lo_ = {lo_.x - 2 * pad_, lo_.y - 2 * pad_};
  hi_ = {hi_.x + 2 * pad_, hi_.y + 2 * pad_};

  const int per_side = std::clamp(static_cast<int>(std::ceil(std::sqrt(facades_.size()))), 1, 128);
  cell_ = std::max(hi_.x - lo_.x, hi_.y - lo_.y) / per_side;
  nx_ = std::max(1, static_cast<int>(std::ceil((hi_.x - lo_.x) / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((hi_.y - lo_.y) / cell_)));
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});

  auto clamp_x = [&](double x) { return std::clamp(static_cast<int>(std::floor((x - lo_.x) / cell_)), 0, nx_ - 1); };
  auto clamp_y = [&](double y) { return std::clamp(static_cast<int>(std::floor((y - lo_.y) / cell_)), 0, ny_ - 1); };
  for (std::size_t i = 0; i < facades_.size(); ++i) {
    const auto& f = facades_[i];
    // Conservative: every cell touched by the padded bounding box.
    const int x0 = clamp_x(std::min(f.a.x, f.b.x) - pad_);
    const int x1 = clamp_x(std::max(f.a.x, f.b.x) + pad_);
    const int y0 = clamp_y(std::min(f.a.y, f.b.y) - pad_);
    const int y1 = clamp_y(std::max(f.a.y, f.b.y) + pad_);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(static_cast<int>(i));
    }
  }
}

std::optional<RayHit> FacadeIndex::cast(Vec2 origin, Vec2 dir, double max_distance) const {
  if (facades_.empty()) return std::nullopt;

  // Clip [0, max_distance] against the index box (slab test).
  double t_enter = 0.0;
  double t_exit = max_distance;
  const double o[2] = {origin.x, origin.y};
  const double d[2] = {dir.x, dir.y};
  const double lo[2] = {lo_.x, lo_.y};
  const double hi[2] = {hi_.x, hi_.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    double t0 = (lo[axis] - o[axis]) / d[axis];
    double t1 = (hi[axis] - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return std::nullopt;

  const Vec2 start = origin + t_enter * dir;
  int cx = std::clamp(static_cast<int>(std::floor((start.x - lo_.x) / cell_)), 0, nx_ - 1);
  int cy = std::clamp(static_cast<int>(std::floor((start.y - lo_.y) / cell_)), 0, ny_ - 1);
  const int step_x = dir.x > 0.0 ? 1 : (dir.x < 0.0 ? -1 : 0);
  const int step_y = dir.y > 0.0 ? 1 : (dir.y < 0.0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  auto boundary_t = [&](int c, int step, double o_axis, double d_axis, double lo_axis) {
    if (step == 0) return inf;
    const double edge = lo_axis + (step > 0 ? c + 1 : c) * cell_;
    return (edge - o_axis) / d_axis;
  };
  double t_next_x = boundary_t(cx, step_x, origin.x, dir.x, lo_.x);
  double t_next_y = boundary_t(cy, step_y, origin.y, dir.y, lo_.y);
  const double dt_x = step_x == 0 ? inf : cell_ / std::abs(dir.x);
  const double dt_y = step_y == 0 ? inf : cell_ / std::abs(dir.y);

  std::optional<RayHit> best;
  while (true) {
    for (int idx : cells_[static_cast<std::size_t>(cy) * nx_ + cx]) {
      const auto& f = facades_[idx];
      const auto t = ray_segment_hit(origin, dir, f.a, f.b);
      if (!t || *t > max_distance) continue;
      const RayHit hit{*t, f.height};
      if (better_hit(hit, best)) best = hit;
    }
    const double t_leave = std::min(t_next_x, t_next_y);
    // Anything in later cells lies at t >= t_leave (up to the registration
    // padding, which already duplicated near-boundary facades here).
    if (best && best->distance < t_leave) break;
    if (t_leave > t_exit) break;
    if (t_next_x < t_next_y) {
      cx += step_x;
      t_next_x += dt_x;
    } else {
      cy += step_y;
      t_next_y += dt_y;
    }
    if (cx < 0 || cx >= nx_ || cy < 0 || cy >= ny_) break;
  }
  return best;
}

VisibilityField::VisibilityField(const City& city, const PerceptionConfig& cfg)
    : cfg_(cfg), index_(collect_facades(city)) {
  validate(cfg_);
  for (const auto& b : city.buildings) {
    Footprint fp{b.footprint, b.id, b.footprint.front(), b.footprint.front()};
    for (Vec2 p : b.footprint) {
      fp.lo = {std::min(fp.lo.x, p.x), std::min(fp.lo.y, p.y)};
      fp.hi = {std::max(fp.hi.x, p.x), std::max(fp.hi.y, p.y)};
    }
    footprints_.push_back(fp);
  }
  directions_.reserve(cfg_.n_rays);
  for (int j = 0; j < cfg_.n_rays; ++j) {
    const double azimuth = 2.0 * std::numbers::pi * j / cfg_.n_rays;
    directions_.push_back({std::cos(azimuth), std::sin(azimuth)});
  }
}

int VisibilityField::building_containing(Vec2 p) const {
  for (std::size_t i = 0; i < footprints_.size(); ++i) {
    const auto& fp = footprints_[i];
    if (p.x < fp.lo.x || p.x > fp.hi.x || p.y < fp.lo.y || p.y > fp.hi.y) continue;
    if (strictly_inside(p, fp.polygon)) return static_cast<int>(i);
  }
  return -1;
}

double VisibilityField::ratio(Vec2 p) const {
  if (const int b = building_containing(p); b >= 0) {
    throw DomainError("visibility_ratio: point lies inside building " + std::to_string(footprints_[b].id));
  }
  double total = 0.0;
  for (Vec2 dir : directions_) {
    total += ray_openness(index_.cast(p, dir, cfg_.max_distance), cfg_.eye_height);
  }
  return total / static_cast<double>(directions_.size());
}

double visibility_ratio(Vec2 p, const City& city, const PerceptionConfig& cfg) {
  return VisibilityField(city, cfg).ratio(p);
}

double curvature(Vec2 p_prev, Vec2 p, Vec2 p_next) {
  if (p_prev == p || p_next == p) throw DomainError("curvature: coincident points");
  const Vec2 d1 = p - p_prev;
  const Vec2 d2 = p_next - p;
  const double c = cross(d1, d2);
  const double d = dot(d1, d2);
  if (c == 0.0 && d < 0.0) return 1.0;
  return std::atan2(c, d) / std::numbers::pi;
}

FeatureSequence featurize_trajectory(std::span<const int> nodes, const City& city,
                                     const VisibilityField& field) {
  if (nodes.size() < 2) throw DomainError("featurize_trajectory: need at least 2 nodes");
  std::vector<Vec2> pos;
  pos.reserve(nodes.size());
  for (int id : nodes) {
    const int idx = city.network.index_of(id);
    if (idx < 0) throw DomainError("featurize_trajectory: node " + std::to_string(id) + " is not in the network");
    pos.push_back(city.network.nodes[idx].pos);
  }
  FeatureSequence out(nodes.size());
  for (std::size_t t = 0; t < pos.size(); ++t) {
    out[t].visibility = field.ratio(pos[t]);
    if (t > 0 && t + 1 < pos.size()) out[t].curvature = curvature(pos[t - 1], pos[t], pos[t + 1]);
  }
  return out;
}

FeatureSequence featurize_trajectory(std::span<const int> nodes, const City& city,
                                     const PerceptionConfig& cfg) {
  return featurize_trajectory(nodes, city, VisibilityField(city, cfg));
}

std::pair<Vec2, Vec2> city_bounds(const City& city) {
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-lo.x, -lo.y};
  auto grow = [&](Vec2 p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  };
  for (const auto& n : city.network.nodes) grow(n.pos);
  for (const auto& b : city.buildings) {
    for (Vec2 p : b.footprint) grow(p);
  }
  if (lo.x > hi.x) return {{0.0, 0.0}, {0.0, 0.0}};
  return {lo, hi};
}

ExposureMap exposure_map(const City& city, const PerceptionConfig& cfg, double grid_step) {
  if (!(grid_step > 0.0)) throw ParameterError("grid_step", "must be > 0");
  const VisibilityField field(city, cfg);
  const auto [lo, hi] = city_bounds(city);
  ExposureMap map;
  map.origin = lo;
  map.step = grid_step;
  map.nx = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / grid_step)));
  map.ny = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / grid_step)));
  map.values.resize(static_cast<std::size_t>(map.nx) * map.ny);
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const Vec2 c = map.cell_center(ix, iy);
      if (field.building_containing(c) >= 0) continue;
      map.values[static_cast<std::size_t>(iy) * map.nx + ix] = field.ratio(c);
    }
  }
  return map;
}

}  // namespace asymcity
