#pragma once

// Asymmetry measurements on a trained encoder: per-origin means of the
// origin-specific latent block, their divergence and mean pairwise distance,
// the origin distance matrix, and a PCA projection of the embeddings.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymcity/encoder.hpp"
#include "asymcity/trajectories.hpp"

namespace asymcity {

struct OriginStats {
  std::vector<std::vector<double>> mu_specific;  // one mean per origin
  std::vector<std::size_t> counts;
  int size() const { return static_cast<int>(mu_specific.size()); }
};

enum class DivergenceMode {
  kComponentVariance,  // sum_k Var over the components of mu_k
  kAcrossOrigins,      // sum_d Var over origins of mu_{k,d}
};

struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> data;  // row-major
  double at(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

using Point2 = std::array<double, 2>;

/// z_specific of every trajectory, in dataset order.
std::vector<std::vector<double>> specific_embeddings(const EncoderParams& params, const Dataset& dataset);

OriginStats origin_means(std::span<const std::vector<double>> embeddings,
                         std::span<const int> labels, int n_origins);
OriginStats origin_means(const EncoderParams& params, const Dataset& dataset);

double origin_divergence(const OriginStats& stats,
                         DivergenceMode mode = DivergenceMode::kComponentVariance);
double global_asymmetry(const OriginStats& stats);
SquareMatrix distance_matrix(const OriginStats& stats);

/// Centered projection onto the two leading principal directions. Each
/// direction is signed so its largest-magnitude coefficient is positive.
std::vector<Point2> project_2d(std::span<const std::vector<double>> embeddings);

/// Fraction of validation trajectories whose z_specific is nearest (in
/// Euclidean distance) to the training centroid of their own origin.
double nearest_centroid_accuracy(const EncoderParams& params, const Dataset& dataset);

/// Mean squared distance of z_shared to its mean over the whole dataset.
double shared_dispersion(const EncoderParams& params, const Dataset& dataset);

struct ReportMeta {
  std::string city;
  std::uint64_t seed = 0;
  std::string config_digest;
};

struct AsymmetryReport {
  ReportMeta meta;
  OriginStats stats;
  double origin_divergence = 0.0;
  double origin_divergence_across = 0.0;
  double global_asymmetry = 0.0;
  SquareMatrix distances;
  std::vector<Point2> projection;
  std::vector<int> projection_origin;
};

AsymmetryReport analyze(const EncoderParams& params, const Dataset& dataset, ReportMeta meta);

nlohmann::json report_to_json(const AsymmetryReport& report);
/// "x,y,origin" rows.
std::string projection_csv(const AsymmetryReport& report);

}  // namespace asymcity
