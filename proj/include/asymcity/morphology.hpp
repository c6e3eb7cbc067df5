#pragma once

// Synthetic and imported cities: building footprints with heights on top of
// a walkable street graph.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymcity/geometry.hpp"

namespace asymcity {

struct Building {
  int id = 0;
  Polygon footprint;  // counter-clockwise, simple
  double height = 0.0;
};

struct StreetNode {
  int id = 0;
  Vec2 pos;
};

struct StreetNetwork {
  std::vector<StreetNode> nodes;
  std::vector<std::pair<int, int>> edges;

  /// Index into `nodes` for a node id, or -1.
  int index_of(int id) const;
  /// Sorted neighbor ids per node index.
  std::vector<std::vector<int>> adjacency() const;
  bool connected() const;
};

enum class Layout { kGrid, kRadial, kImported };
enum class HeightMode { kUniform, kGradient, kRandom, kImported };

std::string_view to_string(Layout layout);
std::string_view to_string(HeightMode mode);
Layout parse_layout(std::string_view text);
HeightMode parse_height_mode(std::string_view text);

struct CityMeta {
  Layout layout = Layout::kGrid;
  HeightMode height_mode = HeightMode::kUniform;
  std::uint64_t seed = 0;
};

struct City {
  std::vector<Building> buildings;
  StreetNetwork network;
  CityMeta meta;
};

struct HeightParams {
  double h_uniform = 30.0;
  double h_min = 10.0;
  double h_max = 60.0;
};

struct GridParams {
  int blocks_per_side = 8;
  double block_pitch = 100.0;
  double building_inset = 10.0;
  HeightParams heights;
};

struct RadialParams {
  int rings = 5;
  double ring_spacing = 100.0;
  int avenues = 12;
  double building_inset = 10.0;
  HeightParams heights;
};

void validate(const GridParams& params);
void validate(const RadialParams& params);

City generate_grid_city(const GridParams& params, std::uint64_t seed);
City generate_radial_city(const RadialParams& params, std::uint64_t seed);

/// Reassign heights. Gradient mode runs along +x for grid layouts and
/// decreases with distance from the origin for radial ones.
City assign_heights(City city, HeightMode mode, const HeightParams& params, std::uint64_t seed);

/// Checks every City invariant; throws ValidationError on the first breach.
void validate_city(const City& city);

nlohmann::json export_city(const City& city);
/// Parses and validates a City document; meta.layout becomes `imported`.
City import_city(const nlohmann::json& doc);
/// Parses and validates without rewriting meta (used to reload generated cities).
City load_city(const nlohmann::json& doc);

}  // namespace asymcity
