#pragma once

// Origin selection and origin-tagged random-walk datasets.

#include <cstdint>
#include <string>
#include <vector>

#include "asymcity/morphology.hpp"
#include "asymcity/perception.hpp"

namespace asymcity {

struct OriginSet {
  std::vector<int> origins;  // node ids, index = origin label k
  int size() const { return static_cast<int>(origins.size()); }
};

enum class Split { kTrain, kValidation };

struct Trajectory {
  int origin_index = 0;
  std::vector<int> nodes;  // nodes[0] is the origin node
  FeatureSequence features;
  Split split = Split::kTrain;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct DatasetConfig {
  int per_origin = 64;  // N_k
  int steps = 20;       // L; trajectories hold L + 1 nodes
  double train_fraction = 0.9;
  PerceptionConfig perception;
  std::uint64_t seed = 0;
};

void validate(const DatasetConfig& cfg);

struct Dataset {
  OriginSet origins;
  std::vector<Trajectory> trajectories;

  int n_origins() const { return origins.size(); }
  std::size_t seq_len() const { return trajectories.empty() ? 0 : trajectories.front().features.size(); }
  std::vector<std::size_t> indices(Split split) const;
};

/// Farthest-point sampling. The first origin is the lexicographically
/// smallest (x, y); ties go to the smaller node id.
OriginSet select_origins(const StreetNetwork& network, int k, std::uint64_t seed);

/// N non-backtracking random walks of exactly `steps` moves (dead ends
/// allow the only move back).
std::vector<std::vector<int>> sample_walks(const StreetNetwork& network, int origin, int n,
                                           int steps, std::uint64_t seed);

/// Per-origin walk seed: seed XOR fnv1a("origin/<k>").
std::uint64_t walk_seed(std::uint64_t seed, int origin_index);

Dataset build_dataset(const City& city, const OriginSet& origins, const DatasetConfig& cfg);

/// One JSON object per line: {"origin","nodes","features","split"}.
std::string serialize_dataset(const Dataset& dataset);
/// Inverse of serialize_dataset. Origin node ids are recovered from the
/// first node of each origin's trajectories.
Dataset parse_dataset(const std::string& text);

}  // namespace asymcity
