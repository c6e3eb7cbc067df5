#include "asymcity/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "asymcity/error.hpp"
#include "asymcity/rng.hpp"

namespace asymcity {

void validate(const DatasetConfig& cfg) {
  if (cfg.per_origin < 1) throw ParameterError("N_k", "must be >= 1");
  if (cfg.steps < 2) throw ParameterError("L", "must be >= 2");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ParameterError("split", "train fraction must lie in (0, 1)");
  }
  validate(cfg.perception);
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].split == split) out.push_back(i);
  }
  return out;
}

OriginSet select_origins(const StreetNetwork& network, int k, std::uint64_t /*seed*/) {
  const auto& nodes = network.nodes;
  if (k < 1) throw ParameterError("K", "must be >= 1");
  if (static_cast<std::size_t>(k) > nodes.size()) {
    throw ParameterError("K", "exceeds node count " + std::to_string(nodes.size()));
  }
  std::size_t first = 0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const Vec2 a = nodes[i].pos;
    const Vec2 b = nodes[first].pos;
    if (a.x < b.x || (a.x == b.x && (a.y < b.y || (a.y == b.y && nodes[i].id < nodes[first].id)))) {
      first = i;
    }
  }
  OriginSet set;
  set.origins.push_back(nodes[first].id);
  std::vector<double> min_dist(nodes.size(), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(nodes.size(), 0);
  chosen[first] = 1;
  std::size_t last = first;
  while (set.size() < k) {
    std::size_t best = nodes.size();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      min_dist[i] = std::min(min_dist[i], norm(nodes[i].pos - nodes[last].pos));
      if (chosen[i]) continue;
      if (best == nodes.size() || min_dist[i] > min_dist[best] ||
          (min_dist[i] == min_dist[best] && nodes[i].id < nodes[best].id)) {
        best = i;
      }
    }
    chosen[best] = 1;
    set.origins.push_back(nodes[best].id);
    last = best;
  }
  return set;
}

std::vector<std::vector<int>> sample_walks(const StreetNetwork& network, int origin, int n,
                                           int steps, std::uint64_t seed) {
  if (steps < 2) throw ParameterError("L", "must be >= 2");
  if (network.index_of(origin) < 0) throw DomainError("sample_walks: unknown origin node " + std::to_string(origin));
  const auto adj = network.adjacency();
  Rng rng(seed);
  std::vector<std::vector<int>> walks;
  walks.reserve(n);
  std::vector<int> candidates;
  for (int w = 0; w < n; ++w) {
    std::vector<int> walk{origin};
    walk.reserve(steps + 1);
    int prev = -1;
    bool has_prev = false;
    for (int s = 0; s < steps; ++s) {
      const auto& nbrs = adj[network.index_of(walk.back())];
      if (nbrs.empty()) throw DomainError("sample_walks: isolated node " + std::to_string(walk.back()));
      candidates.clear();
      for (int nb : nbrs) {
        if (!has_prev || nb != prev || nbrs.size() == 1) candidates.push_back(nb);
      }
      const int next = candidates[rng.below(candidates.size())];
      prev = walk.back();
      has_prev = true;
      walk.push_back(next);
    }
    walks.push_back(std::move(walk));
  }
  return walks;
}

std::uint64_t walk_seed(std::uint64_t seed, int origin_index) {
  return derive_seed(seed, "origin/" + std::to_string(origin_index));
}

Dataset build_dataset(const City& city, const OriginSet& origins, const DatasetConfig& cfg) {
  validate(cfg);
  const VisibilityField field(city, cfg.perception);

  // Node visibility is reused by every walk that passes through.
  std::map<int, double> visibility_cache;
  auto visibility_at = [&](int id) {
    auto it = visibility_cache.find(id);
    if (it != visibility_cache.end()) return it->second;
    const double v = field.ratio(city.network.nodes[city.network.index_of(id)].pos);
    visibility_cache.emplace(id, v);
    return v;
  };

  Dataset ds;
  ds.origins = origins;
  Rng split_rng(derive_seed(cfg.seed, "split"));
  for (int k = 0; k < origins.size(); ++k) {
    const auto walks = sample_walks(city.network, origins.origins[k], cfg.per_origin, cfg.steps,
                                    walk_seed(cfg.seed, k));
    bool any_validation = false;
    for (const auto& walk : walks) {
      Trajectory traj;
      traj.origin_index = k;
      traj.nodes = walk;
      traj.features.resize(walk.size());
      for (std::size_t t = 0; t < walk.size(); ++t) {
        const int idx = city.network.index_of(walk[t]);
        traj.features[t].visibility = visibility_at(walk[t]);
        if (t > 0 && t + 1 < walk.size()) {
          traj.features[t].curvature =
              curvature(city.network.nodes[city.network.index_of(walk[t - 1])].pos,
                        city.network.nodes[idx].pos,
                        city.network.nodes[city.network.index_of(walk[t + 1])].pos);
        }
      }
      traj.split = split_rng.uniform() < cfg.train_fraction ? Split::kTrain : Split::kValidation;
      any_validation = any_validation || traj.split == Split::kValidation;
      ds.trajectories.push_back(std::move(traj));
    }
    if (!any_validation) ds.trajectories.back().split = Split::kValidation;
  }
  return ds;
}

std::string serialize_dataset(const Dataset& dataset) {
  std::ostringstream out;
  for (const auto& t : dataset.trajectories) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : t.features) features.push_back({f.visibility, f.curvature});
    nlohmann::json rec = {{"origin", t.origin_index},
                          {"nodes", t.nodes},
                          {"features", features},
                          {"split", t.split == Split::kTrain ? "train" : "val"}};
    out << rec.dump() << '\n';
  }
  return out.str();
}

Dataset parse_dataset(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::map<int, int> origin_nodes;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where, e.what());
    }
    auto field = [&](const char* key) -> const nlohmann::json& {
      if (!rec.is_object() || !rec.contains(key)) throw ParseError(where + "/" + key, "missing field");
      return rec.at(key);
    };
    Trajectory t;
    if (!field("origin").is_number_integer() || field("origin").get<int>() < 0) {
      throw ParseError(where + "/origin", "expected a non-negative integer");
    }
    t.origin_index = field("origin").get<int>();
    const auto& nodes = field("nodes");
    if (!nodes.is_array() || nodes.size() < 2) throw ParseError(where + "/nodes", "expected an array of >= 2 node ids");
    for (const auto& n : nodes) {
      if (!n.is_number_integer()) throw ParseError(where + "/nodes", "expected integer node ids");
      t.nodes.push_back(n.get<int>());
    }
    const auto& features = field("features");
    if (!features.is_array() || features.size() != t.nodes.size()) {
      throw ParseError(where + "/features", "expected one [v, c] pair per node");
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto& f = features[i];
      if (!f.is_array() || f.size() != 2 || !f[0].is_number() || !f[1].is_number()) {
        throw ParseError(where + "/features/" + std::to_string(i), "expected [v, c]");
      }
      t.features.push_back({f[0].get<double>(), f[1].get<double>()});
    }
    const auto& split = field("split");
    if (split == "train") {
      t.split = Split::kTrain;
    } else if (split == "val") {
      t.split = Split::kValidation;
    } else {
      throw ParseError(where + "/split", "expected \"train\" or \"val\"");
    }
    if (!ds.trajectories.empty() && t.nodes.size() != ds.trajectories.front().nodes.size()) {
      throw ParseError(where + "/nodes", "all trajectories must have the same length");
    }
    auto [it, inserted] = origin_nodes.emplace(t.origin_index, t.nodes.front());
    if (!inserted && it->second != t.nodes.front()) {
      throw ValidationError(where + ": origin " + std::to_string(t.origin_index) +
                            " starts at two different nodes");
    }
    ds.trajectories.push_back(std::move(t));
  }
  if (ds.trajectories.empty()) throw ParseError("line 1", "dataset is empty");
  const int k = origin_nodes.rbegin()->first + 1;
  if (static_cast<int>(origin_nodes.size()) != k) {
    throw ValidationError("dataset origin labels are not contiguous from 0");
  }
  for (const auto& [label, node] : origin_nodes) ds.origins.origins.push_back(node);
  return ds;
}

}  // namespace asymcity
