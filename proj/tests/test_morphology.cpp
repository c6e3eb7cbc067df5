#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "asymcity/error.hpp"
#include "asymcity/morphology.hpp"

using namespace asymcity;

namespace {

bool nodes_outside_buildings(const City& city) {
  for (const auto& n : city.network.nodes) {
    for (const auto& b : city.buildings) {
      if (strictly_inside(n.pos, b.footprint)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("grid city has lattice counts and inset square blocks") {
  const City city = generate_grid_city({}, 1);
  CHECK(city.network.nodes.size() == 81);
  CHECK(city.network.edges.size() == 144);
  CHECK(city.buildings.size() == 64);
  CHECK(city.meta.layout == Layout::kGrid);
  CHECK(city.network.connected());
  CHECK(nodes_outside_buildings(city));
  CHECK_NOTHROW(validate_city(city));

  GridParams small;
  small.blocks_per_side = 2;
  const City tiny = generate_grid_city(small, 0);
  for (const auto& b : tiny.buildings) {
    const auto [xmin, xmax] = std::minmax({b.footprint[0].x, b.footprint[1].x, b.footprint[2].x, b.footprint[3].x});
    const auto [ymin, ymax] = std::minmax({b.footprint[0].y, b.footprint[1].y, b.footprint[2].y, b.footprint[3].y});
    CHECK(xmax - xmin == 80.0);
    CHECK(ymax - ymin == 80.0);
    CHECK(signed_area(b.footprint) == 6400.0);
  }
}

TEST_CASE("radial city has ring-and-avenue counts") {
  const City city = generate_radial_city({}, 1);
  CHECK(city.network.nodes.size() == 61);
  // 60 ring chords + 60 avenue segments (12 from the center, 48 between rings).
  CHECK(city.network.edges.size() == 120);
  int chords = 0;
  for (auto [a, b] : city.network.edges) {
    if (a != 0 && b != 0 && (a - 1) / 12 == (b - 1) / 12) ++chords;
  }
  CHECK(chords == 60);
  CHECK(city.buildings.size() == 48);
  CHECK(city.network.connected());
  CHECK(nodes_outside_buildings(city));
  CHECK_NOTHROW(validate_city(city));

  RadialParams small;
  small.rings = 2;
  small.avenues = 3;
  const City tri = generate_radial_city(small, 0);
  CHECK(tri.buildings.size() == 3);
  for (const auto& b : tri.buildings) {
    CHECK(b.footprint.size() == 4);
    CHECK(is_simple(b.footprint));
    CHECK(signed_area(b.footprint) > 0.0);
  }
}

TEST_CASE("generators are deterministic and serialize identically") {
  CHECK(export_city(generate_grid_city({}, 5)).dump() == export_city(generate_grid_city({}, 5)).dump());
  CHECK(export_city(generate_radial_city({}, 5)).dump() == export_city(generate_radial_city({}, 5)).dump());
}

TEST_CASE("invalid generator parameters name the field") {
  GridParams g;
  g.blocks_per_side = 1;
  try {
    generate_grid_city(g, 0);
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    CHECK(e.field() == "blocks_per_side");
  }
  g = {};
  g.building_inset = 50.0;
  CHECK_THROWS_AS(generate_grid_city(g, 0), ParameterError);
  g = {};
  g.heights.h_min = 70.0;
  CHECK_THROWS_AS(generate_grid_city(g, 0), ParameterError);
  RadialParams r;
  r.avenues = 2;
  CHECK_THROWS_AS(generate_radial_city(r, 0), ParameterError);
  r = {};
  r.rings = 1;
  CHECK_THROWS_AS(generate_radial_city(r, 0), ParameterError);
  CHECK_THROWS_AS(parse_layout("hexagonal"), ParameterError);
}

TEST_CASE("assign_heights modes") {
  const HeightParams hp;
  const City grid = generate_grid_city({}, 0);

  const City uniform = assign_heights(grid, HeightMode::kUniform, hp, 0);
  for (const auto& b : uniform.buildings) CHECK(b.height == 30.0);

  const City gradient = assign_heights(grid, HeightMode::kGradient, hp, 0);
  double lo = 1e9, hi = -1e9;
  for (const auto& b : gradient.buildings) {
    lo = std::min(lo, b.height);
    hi = std::max(hi, b.height);
  }
  CHECK(lo == 10.0);
  CHECK(hi == 60.0);
  // Monotone non-decreasing in centroid x.
  for (const auto& a : gradient.buildings) {
    for (const auto& b : gradient.buildings) {
      if (centroid(a.footprint).x < centroid(b.footprint).x) CHECK(a.height <= b.height);
    }
  }
  CHECK(gradient.meta.height_mode == HeightMode::kGradient);

  const City radial = assign_heights(generate_radial_city({}, 0), HeightMode::kGradient, hp, 0);
  for (const auto& a : radial.buildings) {
    for (const auto& b : radial.buildings) {
      if (norm(centroid(a.footprint)) < norm(centroid(b.footprint))) CHECK(a.height >= b.height);
    }
  }

  const City r1 = assign_heights(grid, HeightMode::kRandom, hp, 7);
  const City r2 = assign_heights(grid, HeightMode::kRandom, hp, 7);
  const City r3 = assign_heights(grid, HeightMode::kRandom, hp, 8);
  bool differs = false;
  for (std::size_t i = 0; i < r1.buildings.size(); ++i) {
    CHECK(r1.buildings[i].height == r2.buildings[i].height);
    CHECK(r1.buildings[i].height >= 10.0);
    CHECK(r1.buildings[i].height <= 60.0);
    differs = differs || r1.buildings[i].height != r3.buildings[i].height;
  }
  CHECK(differs);

  // Assignment follows ascending building id, not container order.
  City shuffled = grid;
  std::reverse(shuffled.buildings.begin(), shuffled.buildings.end());
  const City rs = assign_heights(shuffled, HeightMode::kRandom, hp, 7);
  for (const auto& b : rs.buildings) CHECK(b.height == r1.buildings[b.id].height);

  CHECK_THROWS_AS(assign_heights(grid, HeightMode::kImported, hp, 0), ParameterError);
  City empty = grid;
  empty.buildings.clear();
  CHECK_THROWS_AS(assign_heights(empty, HeightMode::kUniform, hp, 0), DomainError);
}

namespace {

nlohmann::json minimal_doc() {
  return nlohmann::json::parse(R"({
    "meta": {"layout": "imported", "height_mode": "imported", "seed": 0},
    "buildings": [{"id": 3, "footprint": [[10.0, 10.0], [20.0, 10.0], [15.0, 18.5]], "height": 12.5}],
    "network": {"nodes": [{"id": 0, "x": 0.0, "y": 0.0}, {"id": 1, "x": 30.0, "y": 0.0}],
                "edges": [[0, 1]]}
  })");
}

}  // namespace

TEST_CASE("import_city reads a minimal document exactly") {
  const City city = import_city(minimal_doc());
  CHECK(city.meta.layout == Layout::kImported);
  REQUIRE(city.buildings.size() == 1);
  CHECK(city.buildings[0].id == 3);
  CHECK(city.buildings[0].height == 12.5);
  CHECK(city.buildings[0].footprint[2] == Vec2{15.0, 18.5});
  CHECK(city.network.nodes.size() == 2);
  CHECK(city.network.edges == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(export_city(city) == minimal_doc());
}

TEST_CASE("import_city rejects malformed and invalid documents") {
  auto doc = minimal_doc();
  doc["network"]["edges"] = nlohmann::json::parse("[[0, 7]]");
  CHECK_THROWS_AS(import_city(doc), ValidationError);

  doc = minimal_doc();
  doc["buildings"][0]["height"] = "tall";
  try {
    import_city(doc);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.path() == "/buildings/0/height");
  }

  doc = minimal_doc();
  doc["network"]["nodes"].push_back({{"id", 2}, {"x", 100.0}, {"y", 100.0}});
  CHECK_THROWS_WITH_AS(import_city(doc), "street network is not connected", ValidationError);

  doc = minimal_doc();
  doc["network"]["nodes"][1]["x"] = 15.0;
  doc["network"]["nodes"][1]["y"] = 12.0;
  CHECK_THROWS_WITH_AS(import_city(doc), "node 1 lies inside building 3", ValidationError);

  doc = minimal_doc();
  doc["network"]["edges"] = nlohmann::json::parse("[[0, 0], [0, 1]]");
  CHECK_THROWS_AS(import_city(doc), ValidationError);

  doc = minimal_doc();
  doc["buildings"][0]["footprint"] = nlohmann::json::parse("[[0,0],[1,1],[1,0],[0,1]]");
  CHECK_THROWS_AS(import_city(doc), ValidationError);

  doc = minimal_doc();
  doc.erase("network");
  CHECK_THROWS_AS(import_city(doc), ParseError);
}

TEST_CASE("export/import round trip preserves generated cities") {
  for (const City& city : {generate_grid_city({}, 11), generate_radial_city({}, 12)}) {
    const auto doc = export_city(assign_heights(city, HeightMode::kRandom, {}, 3));
    const City back = load_city(nlohmann::json::parse(doc.dump()));
    CHECK(export_city(back) == doc);
    const City imported = import_city(doc);
    auto expected = doc;
    expected["meta"]["layout"] = "imported";
    CHECK(export_city(imported) == expected);
  }
}
