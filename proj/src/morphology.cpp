#include "asymcity/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <set>
#include <unordered_map>

#include "asymcity/error.hpp"
#include "asymcity/rng.hpp"

namespace asymcity {

using nlohmann::json;

int StreetNetwork::index_of(int id) const {
  // Generated networks use dense ids equal to the index.
  if (id >= 0 && static_cast<std::size_t>(id) < nodes.size() && nodes[id].id == id) return id;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::vector<int>> StreetNetwork::adjacency() const {
  std::vector<std::vector<int>> adj(nodes.size());
  for (auto [a, b] : edges) {
    const int ia = index_of(a);
    const int ib = index_of(b);
    if (ia < 0 || ib < 0) continue;
    adj[ia].push_back(b);
    adj[ib].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

bool StreetNetwork::connected() const {
  if (nodes.empty()) return true;
  const auto adj = adjacency();
  std::vector<char> seen(nodes.size(), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const int cur = frontier.front();
    frontier.pop();
    for (int nb_id : adj[cur]) {
      const int nb = index_of(nb_id);
      if (!seen[nb]) {
        seen[nb] = 1;
        ++reached;
        frontier.push(nb);
      }
    }
  }
  return reached == nodes.size();
}

std::string_view to_string(Layout layout) {
  switch (layout) {
    case Layout::kGrid: return "grid";
    case Layout::kRadial: return "radial";
    case Layout::kImported: return "imported";
  }
  return "?";
}

std::string_view to_string(HeightMode mode) {
  switch (mode) {
    case HeightMode::kUniform: return "uniform";
    case HeightMode::kGradient: return "gradient";
    case HeightMode::kRandom: return "random";
    case HeightMode::kImported: return "imported";
  }
  return "?";
}

Layout parse_layout(std::string_view text) {
  if (text == "grid") return Layout::kGrid;
  if (text == "radial") return Layout::kRadial;
  if (text == "imported") return Layout::kImported;
  throw ParameterError("layout", "unknown layout '" + std::string(text) +
                                     "' (valid layouts: grid, radial, imported)");
}

HeightMode parse_height_mode(std::string_view text) {
  if (text == "uniform") return HeightMode::kUniform;
  if (text == "gradient") return HeightMode::kGradient;
  if (text == "random") return HeightMode::kRandom;
  if (text == "imported") return HeightMode::kImported;
  throw ParameterError("height_mode", "unknown height mode '" + std::string(text) +
                                          "' (valid modes: uniform, gradient, random, imported)");
}

namespace {

void validate_heights(const HeightParams& h) {
  if (!(h.h_uniform > 0.0)) throw ParameterError("h_uniform", "must be > 0");
  if (!(h.h_min > 0.0)) throw ParameterError("h_min", "must be > 0");
  if (!(h.h_min < h.h_max)) throw ParameterError("h_max", "must exceed h_min");
}

// Shrink a convex counter-clockwise polygon by moving every edge inward.
Polygon inset_convex(const Polygon& poly, double inset) {
  const std::size_t n = poly.size();
  std::vector<Vec2> base(n);
  std::vector<Vec2> dir(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = poly[(i + 1) % n] - poly[i];
    const double len = norm(e);
    const Vec2 inward{-e.y / len, e.x / len};
    base[i] = poly[i] + inset * inward;
    dir[i] = e;
  }
  Polygon out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    // base[prev] + s*dir[prev] == base[i] + t*dir[i]
    const double denom = cross(dir[prev], dir[i]);
    const double s = cross(base[i] - base[prev], dir[i]) / denom;
    out[i] = base[prev] + s * dir[prev];
  }
  return out;
}

}  // namespace

void validate(const GridParams& p) {
  if (p.blocks_per_side < 2) throw ParameterError("blocks_per_side", "must be >= 2");
  if (!(p.block_pitch > 0.0)) throw ParameterError("block_pitch", "must be > 0");
  if (!(p.building_inset > 0.0) || !(p.building_inset < p.block_pitch / 2.0)) {
    throw ParameterError("building_inset", "must lie in (0, block_pitch/2)");
  }
  validate_heights(p.heights);
}

void validate(const RadialParams& p) {
  if (p.rings < 2) throw ParameterError("rings", "must be >= 2");
  if (p.avenues < 3) throw ParameterError("avenues", "must be >= 3");
  if (!(p.ring_spacing > 0.0)) throw ParameterError("ring_spacing", "must be > 0");
  if (!(p.building_inset > 0.0) || !(p.building_inset < p.ring_spacing / 2.0)) {
    throw ParameterError("building_inset", "must lie in (0, ring_spacing/2)");
  }
  validate_heights(p.heights);
}

City generate_grid_city(const GridParams& params, std::uint64_t seed) {
  validate(params);
  const int n = params.blocks_per_side;
  const double pitch = params.block_pitch;
  const double inset = params.building_inset;

  City city;
  city.meta = {Layout::kGrid, HeightMode::kUniform, seed};
  auto node_id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      city.network.nodes.push_back({node_id(i, j), {i * pitch, j * pitch}});
    }
  }
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      if (i < n) city.network.edges.emplace_back(node_id(i, j), node_id(i + 1, j));
      if (j < n) city.network.edges.emplace_back(node_id(i, j), node_id(i, j + 1));
    }
  }
  for (int bj = 0; bj < n; ++bj) {
    for (int bi = 0; bi < n; ++bi) {
      const double x0 = bi * pitch + inset;
      const double x1 = (bi + 1) * pitch - inset;
      const double y0 = bj * pitch + inset;
      const double y1 = (bj + 1) * pitch - inset;
      city.buildings.push_back(
          {bj * n + bi, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, params.heights.h_uniform});
    }
  }
  return city;
}

City generate_radial_city(const RadialParams& params, std::uint64_t seed) {
  validate(params);
  const int rings = params.rings;
  const int avenues = params.avenues;

  City city;
  city.meta = {Layout::kRadial, HeightMode::kUniform, seed};
  auto node_id = [avenues](int ring, int avenue) { return 1 + (ring - 1) * avenues + avenue; };
  auto position = [&](int ring, int avenue) {
    const double angle = 2.0 * std::numbers::pi * avenue / avenues;
    const double r = ring * params.ring_spacing;
    return Vec2{r * std::cos(angle), r * std::sin(angle)};
  };

  city.network.nodes.push_back({0, {0.0, 0.0}});
  for (int ring = 1; ring <= rings; ++ring) {
    for (int a = 0; a < avenues; ++a) city.network.nodes.push_back({node_id(ring, a), position(ring, a)});
  }
  for (int a = 0; a < avenues; ++a) {
    city.network.edges.emplace_back(0, node_id(1, a));
    for (int ring = 1; ring < rings; ++ring) {
      city.network.edges.emplace_back(node_id(ring, a), node_id(ring + 1, a));
    }
  }
  for (int ring = 1; ring <= rings; ++ring) {
    for (int a = 0; a < avenues; ++a) {
      city.network.edges.emplace_back(node_id(ring, a), node_id(ring, (a + 1) % avenues));
    }
  }

  int id = 0;
  for (int ring = 1; ring < rings; ++ring) {
    for (int a = 0; a < avenues; ++a) {
      const int next = (a + 1) % avenues;
      const Polygon cell{position(ring, a), position(ring + 1, a), position(ring + 1, next),
                         position(ring, next)};
      Polygon footprint = inset_convex(cell, params.building_inset);
      if (!(signed_area(footprint) > 0.0) || !is_simple(footprint)) {
        throw ParameterError("building_inset", "too large for the innermost sector cells");
      }
      city.buildings.push_back({id++, std::move(footprint), params.heights.h_uniform});
    }
  }
  return city;
}

City assign_heights(City city, HeightMode mode, const HeightParams& params, std::uint64_t seed) {
  if (city.buildings.empty()) throw DomainError("assign_heights: city has no buildings");
  validate_heights(params);

  std::vector<std::size_t> order(city.buildings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return city.buildings[a].id < city.buildings[b].id;
  });

  const double span = params.h_max - params.h_min;
  switch (mode) {
    case HeightMode::kUniform:
      for (auto& b : city.buildings) b.height = params.h_uniform;
      break;
    case HeightMode::kGradient: {
      if (city.meta.layout == Layout::kRadial) {
        double r_max = 0.0;
        for (const auto& b : city.buildings) r_max = std::max(r_max, norm(centroid(b.footprint)));
        for (auto& b : city.buildings) {
          const double r = norm(centroid(b.footprint));
          b.height = r_max > 0.0 ? params.h_max - span * (r / r_max) : params.h_max;
        }
      } else {
        double x_min = std::numeric_limits<double>::infinity();
        double x_max = -x_min;
        for (const auto& b : city.buildings) {
          const double cx = centroid(b.footprint).x;
          x_min = std::min(x_min, cx);
          x_max = std::max(x_max, cx);
        }
        for (auto& b : city.buildings) {
          const double cx = centroid(b.footprint).x;
          b.height = x_max > x_min ? params.h_min + span * (cx - x_min) / (x_max - x_min)
                                   : params.h_min;
        }
      }
      break;
    }
    case HeightMode::kRandom: {
      Rng rng(seed);
      for (std::size_t idx : order) city.buildings[idx].height = rng.uniform(params.h_min, params.h_max);
      break;
    }
    case HeightMode::kImported:
      throw ParameterError("height_mode", "'imported' cannot be assigned");
  }
  city.meta.height_mode = mode;
  return city;
}

void validate_city(const City& city) {
  std::set<int> building_ids;
  for (const auto& b : city.buildings) {
    const std::string tag = "building " + std::to_string(b.id);
    if (!building_ids.insert(b.id).second) throw ValidationError("duplicate " + tag);
    if (b.footprint.size() < 3) throw ValidationError(tag + " has fewer than 3 vertices");
    if (!(b.height > 0.0) || !std::isfinite(b.height)) {
      throw ValidationError(tag + " height must be finite and > 0");
    }
    for (Vec2 p : b.footprint) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError(tag + " has non-finite vertex");
    }
    if (!is_simple(b.footprint)) throw ValidationError(tag + " footprint is not simple");
    if (signed_area(b.footprint) <= 0.0) throw ValidationError(tag + " footprint is not counter-clockwise");
  }

  const auto& net = city.network;
  std::set<int> node_ids;
  for (const auto& n : net.nodes) {
    if (!node_ids.insert(n.id).second) throw ValidationError("duplicate node id " + std::to_string(n.id));
    if (!std::isfinite(n.pos.x) || !std::isfinite(n.pos.y)) {
      throw ValidationError("node " + std::to_string(n.id) + " has non-finite coordinates");
    }
  }
  std::set<std::pair<int, int>> seen_edges;
  for (auto [a, b] : net.edges) {
    const std::string tag = "edge [" + std::to_string(a) + "," + std::to_string(b) + "]";
    if (!node_ids.count(a) || !node_ids.count(b)) throw ValidationError(tag + " references a missing node");
    if (a == b) throw ValidationError(tag + " is a self-loop");
    if (!seen_edges.insert({std::min(a, b), std::max(a, b)}).second) {
      throw ValidationError("duplicate " + tag);
    }
  }
  if (!net.connected()) throw ValidationError("street network is not connected");
  for (const auto& n : net.nodes) {
    for (const auto& b : city.buildings) {
      if (strictly_inside(n.pos, b.footprint)) {
        throw ValidationError("node " + std::to_string(n.id) + " lies inside building " +
                              std::to_string(b.id));
      }
    }
  }
}

json export_city(const City& city) {
  json buildings = json::array();
  for (const auto& b : city.buildings) {
    json footprint = json::array();
    for (Vec2 p : b.footprint) footprint.push_back({p.x, p.y});
    buildings.push_back({{"id", b.id}, {"footprint", footprint}, {"height", b.height}});
  }
  json nodes = json::array();
  for (const auto& n : city.network.nodes) nodes.push_back({{"id", n.id}, {"x", n.pos.x}, {"y", n.pos.y}});
  json edges = json::array();
  for (auto [a, b] : city.network.edges) edges.push_back({a, b});
  return {{"meta",
           {{"layout", to_string(city.meta.layout)},
            {"height_mode", to_string(city.meta.height_mode)},
            {"seed", city.meta.seed}}},
          {"buildings", buildings},
          {"network", {{"nodes", nodes}, {"edges", edges}}}};
}

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "/" + key, "missing field");
  return *it;
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path, "expected a number");
  return v.get<double>();
}

int integer_at(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError(path, "expected an integer");
  return v.get<int>();
}

const json& array_at(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path, "expected an array");
  return v;
}

City parse_city(const json& doc) {
  City city;
  const json& meta = require(doc, "meta", "");
  {
    const json& layout = require(meta, "layout", "/meta");
    if (!layout.is_string()) throw ParseError("/meta/layout", "expected a string");
    const json& mode = require(meta, "height_mode", "/meta");
    if (!mode.is_string()) throw ParseError("/meta/height_mode", "expected a string");
    try {
      city.meta.layout = parse_layout(layout.get<std::string>());
    } catch (const ParameterError& e) {
      throw ParseError("/meta/layout", e.what());
    }
    try {
      city.meta.height_mode = parse_height_mode(mode.get<std::string>());
    } catch (const ParameterError& e) {
      throw ParseError("/meta/height_mode", e.what());
    }
    const json& seed = require(meta, "seed", "/meta");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
      throw ParseError("/meta/seed", "expected an integer");
    }
    city.meta.seed = seed.get<std::uint64_t>();
  }

  const json& buildings = array_at(require(doc, "buildings", ""), "/buildings");
  for (std::size_t i = 0; i < buildings.size(); ++i) {
    const std::string path = "/buildings/" + std::to_string(i);
    Building b;
    b.id = integer_at(require(buildings[i], "id", path), path + "/id");
    const json& fp = array_at(require(buildings[i], "footprint", path), path + "/footprint");
    for (std::size_t v = 0; v < fp.size(); ++v) {
      const std::string vpath = path + "/footprint/" + std::to_string(v);
      if (!fp[v].is_array() || fp[v].size() != 2) throw ParseError(vpath, "expected [x, y]");
      b.footprint.push_back({number_at(fp[v][0], vpath + "/0"), number_at(fp[v][1], vpath + "/1")});
    }
    b.height = number_at(require(buildings[i], "height", path), path + "/height");
    city.buildings.push_back(std::move(b));
  }

  const json& network = require(doc, "network", "");
  const json& nodes = array_at(require(network, "nodes", "/network"), "/network/nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "/network/nodes/" + std::to_string(i);
    StreetNode n;
    n.id = integer_at(require(nodes[i], "id", path), path + "/id");
    n.pos.x = number_at(require(nodes[i], "x", path), path + "/x");
    n.pos.y = number_at(require(nodes[i], "y", path), path + "/y");
    city.network.nodes.push_back(n);
  }
  const json& edges = array_at(require(network, "edges", "/network"), "/network/edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "/network/edges/" + std::to_string(i);
    if (!edges[i].is_array() || edges[i].size() != 2) throw ParseError(path, "expected [a, b]");
    city.network.edges.emplace_back(integer_at(edges[i][0], path + "/0"),
                                    integer_at(edges[i][1], path + "/1"));
  }
  return city;
}

}  // namespace

City load_city(const json& doc) {
  City city = parse_city(doc);
  validate_city(city);
  return city;
}

City import_city(const json& doc) {
  City city = load_city(doc);
  city.meta.layout = Layout::kImported;
  return city;
}

}  // namespace asymcity
