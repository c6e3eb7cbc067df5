#include "asymcity/asymmetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "asymcity/error.hpp"
#include "asymcity/kernels.hpp"
#include "asymcity/training.hpp"

namespace asymcity {

namespace {

double population_variance(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / n;
}

}  // namespace

std::vector<std::vector<double>> specific_embeddings(const EncoderParams& params,
                                                     const Dataset& dataset) {
  std::vector<std::vector<double>> out;
  out.reserve(dataset.trajectories.size());
  for (const auto& t : dataset.trajectories) {
    const auto latent = forward(params, flatten(t.features), t.origin_index).latent;
    const auto spec = latent.specific();
    out.emplace_back(spec.begin(), spec.end());
  }
  return out;
}

OriginStats origin_means(std::span<const std::vector<double>> embeddings,
                         std::span<const int> labels, int n_origins) {
  if (embeddings.size() != labels.size()) throw DomainError("origin_means: label count mismatch");
  if (embeddings.empty()) throw DomainError("origin_means: no embeddings");
  const std::size_t dim = embeddings.front().size();
  OriginStats stats;
  stats.mu_specific.assign(n_origins, std::vector<double>(dim, 0.0));
  stats.counts.assign(n_origins, 0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= n_origins) throw DomainError("origin_means: label out of range");
    kernels::axpy(1.0, embeddings[i], stats.mu_specific[k]);
    ++stats.counts[k];
  }
  for (int k = 0; k < n_origins; ++k) {
    if (stats.counts[k] == 0) throw DomainError("origin_means: origin " + std::to_string(k) + " has no trajectories");
    for (double& v : stats.mu_specific[k]) v /= static_cast<double>(stats.counts[k]);
  }
  return stats;
}

OriginStats origin_means(const EncoderParams& params, const Dataset& dataset) {
  const auto emb = specific_embeddings(params, dataset);
  std::vector<int> labels;
  for (const auto& t : dataset.trajectories) labels.push_back(t.origin_index);
  return origin_means(emb, labels, dataset.n_origins());
}

double origin_divergence(const OriginStats& stats, DivergenceMode mode) {
  if (stats.mu_specific.empty()) throw DomainError("origin_divergence: no origins");
  if (mode == DivergenceMode::kComponentVariance) {
    double total = 0.0;
    for (const auto& mu : stats.mu_specific) total += population_variance(mu);
    return total;
  }
  const std::size_t dim = stats.mu_specific.front().size();
  double total = 0.0;
  std::vector<double> column(stats.mu_specific.size());
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t k = 0; k < column.size(); ++k) column[k] = stats.mu_specific[k][d];
    total += population_variance(column);
  }
  return total;
}

double global_asymmetry(const OriginStats& stats) {
  const int k = stats.size();
  if (k < 2) throw DomainError("global_asymmetry: need at least 2 origins");
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i != j) total += std::sqrt(kernels::sq_dist(stats.mu_specific[i], stats.mu_specific[j]));
    }
  }
  return total / static_cast<double>(k * (k - 1));
}

SquareMatrix distance_matrix(const OriginStats& stats) {
  const std::size_t k = stats.mu_specific.size();
  SquareMatrix m{k, std::vector<double>(k * k, 0.0)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double d = std::sqrt(kernels::sq_dist(stats.mu_specific[i], stats.mu_specific[j]));
      m.data[i * k + j] = d;
      m.data[j * k + i] = d;
    }
  }
  return m;
}

std::vector<Point2> project_2d(std::span<const std::vector<double>> embeddings) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw DomainError("project_2d: need at least 2 vectors");
  const std::size_t dim = embeddings.front().size();
  if (dim < 2) throw DomainError("project_2d: need at least 2 dimensions");
  Eigen::MatrixXd x(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != dim) throw DomainError("project_2d: ragged input");
    for (std::size_t d = 0; d < dim; ++d) x(i, d) = embeddings[i][d];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  if (x.cwiseAbs().maxCoeff() == 0.0) throw DomainError("project_2d: input has rank 0");
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd& values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();

  auto leading_axis = [&](Eigen::Index col) {
    Eigen::Index best = 0;
    vectors.col(col).cwiseAbs().maxCoeff(&best);
    return best;
  };
  std::vector<Eigen::Index> order(dim);
  std::iota(order.begin(), order.end(), 0);
  const double tie = 1e-12 * std::max(1.0, values.cwiseAbs().maxCoeff());
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(values(a) - values(b)) > tie) return values(a) > values(b);
    return leading_axis(a) < leading_axis(b);
  });

  std::vector<Point2> out(n);
  for (int axis = 0; axis < 2; ++axis) {
    Eigen::VectorXd dir = vectors.col(order[axis]);
    Eigen::Index lead = 0;
    dir.cwiseAbs().maxCoeff(&lead);
    if (dir(lead) < 0.0) dir = -dir;
    const Eigen::VectorXd coords = x * dir;
    for (std::size_t i = 0; i < n; ++i) out[i][axis] = coords(static_cast<Eigen::Index>(i));
  }
  return out;
}

double nearest_centroid_accuracy(const EncoderParams& params, const Dataset& dataset) {
  const auto emb = specific_embeddings(params, dataset);
  std::vector<std::vector<double>> train_emb;
  std::vector<int> train_labels;
  for (std::size_t i : dataset.indices(Split::kTrain)) {
    train_emb.push_back(emb[i]);
    train_labels.push_back(dataset.trajectories[i].origin_index);
  }
  const auto centroids = origin_means(train_emb, train_labels, dataset.n_origins());
  const auto val = dataset.indices(Split::kValidation);
  if (val.empty()) throw DomainError("nearest_centroid_accuracy: no validation trajectories");
  std::size_t correct = 0;
  for (std::size_t i : val) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < centroids.size(); ++k) {
      const double d = kernels::sq_dist(emb[i], centroids.mu_specific[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best == dataset.trajectories[i].origin_index) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

double shared_dispersion(const EncoderParams& params, const Dataset& dataset) {
  std::vector<std::vector<double>> shared;
  for (const auto& t : dataset.trajectories) {
    const auto latent = forward(params, flatten(t.features), t.origin_index).latent;
    shared.emplace_back(latent.shared().begin(), latent.shared().end());
  }
  std::vector<std::span<const double>> views(shared.begin(), shared.end());
  return loss_shared(views);
}

AsymmetryReport analyze(const EncoderParams& params, const Dataset& dataset, ReportMeta meta) {
  AsymmetryReport r;
  r.meta = std::move(meta);
  const auto emb = specific_embeddings(params, dataset);
  for (const auto& t : dataset.trajectories) r.projection_origin.push_back(t.origin_index);
  r.stats = origin_means(emb, r.projection_origin, dataset.n_origins());
  r.origin_divergence = origin_divergence(r.stats, DivergenceMode::kComponentVariance);
  r.origin_divergence_across = origin_divergence(r.stats, DivergenceMode::kAcrossOrigins);
  r.global_asymmetry = global_asymmetry(r.stats);
  r.distances = distance_matrix(r.stats);
  r.projection = project_2d(emb);
  return r;
}

nlohmann::json report_to_json(const AsymmetryReport& r) {
  return {{"meta", {{"city", r.meta.city}, {"seed", r.meta.seed}, {"config_digest", r.meta.config_digest}}},
          {"n_origins", r.stats.size()},
          {"origin_divergence", r.origin_divergence},
          {"origin_divergence_across_origins", r.origin_divergence_across},
          {"global_asymmetry", r.global_asymmetry},
          {"distance_matrix", r.distances.data},
          {"origin_counts", r.stats.counts},
          {"origin_means", r.stats.mu_specific}};
}

std::string projection_csv(const AsymmetryReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,origin\n";
  for (std::size_t i = 0; i < r.projection.size(); ++i) {
    out << r.projection[i][0] << ',' << r.projection[i][1] << ',' << r.projection_origin[i] << '\n';
  }
  return out.str();
}

}  // namespace asymcity
