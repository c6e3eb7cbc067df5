#include <doctest.h>

#include <cmath>

#include "asymcity/asymmetry.hpp"
#include "asymcity/error.hpp"
#include "asymcity/rng.hpp"
#include "oracles.hpp"

using namespace asymcity;

namespace {

OriginStats stats_of(std::vector<std::vector<double>> means) {
  OriginStats s;
  s.counts.assign(means.size(), 1);
  s.mu_specific = std::move(means);
  return s;
}

std::vector<std::vector<double>> rotate_plane(std::vector<std::vector<double>> m, std::size_t a, std::size_t b,
                                              double angle) {
  for (auto& v : m) {
    const double x = v[a], y = v[b];
    v[a] = std::cos(angle) * x - std::sin(angle) * y;
    v[b] = std::sin(angle) * x + std::cos(angle) * y;
  }
  return m;
}

}  // namespace

TEST_CASE("origin_means examples") {
  const std::vector<std::vector<double>> emb{{1, 2}, {3, 4}, {5, 6}};
  const std::vector<int> labels{0, 1, 2};
  const auto s = origin_means(emb, labels, 3);
  CHECK(s.mu_specific == emb);

  std::vector<std::vector<double>> dup = emb;
  dup.insert(dup.end(), emb.begin(), emb.end());
  std::vector<int> dup_labels{0, 1, 2, 0, 1, 2};
  CHECK(origin_means(dup, dup_labels, 3).mu_specific == emb);

  Rng rng(1);
  const auto z = oracle::random_matrix(rng, 20, 5);
  std::vector<int> l(20);
  for (int i = 0; i < 20; ++i) l[i] = i % 4;
  const auto r = origin_means(z, l, 4);
  for (int k = 0; k < 4; ++k) {
    for (std::size_t d = 0; d < 5; ++d) {
      double acc = 0.0;
      for (int i = k; i < 20; i += 4) acc += z[i][d];
      CHECK(std::abs(r.mu_specific[k][d] - acc / 5.0) < 1e-12);
    }
    CHECK(r.counts[k] == 5);
  }
  CHECK_THROWS_AS(origin_means(emb, labels, 4), DomainError);
}

TEST_CASE("divergence, asymmetry and distance matrix examples") {
  CHECK(origin_divergence(stats_of({{3, 3, 3}, {-1, -1, -1}})) == 0.0);
  CHECK(origin_divergence(stats_of({{0, 2}})) == 1.0);

  const auto s = stats_of({{0, 0}, {3, 4}});
  CHECK(global_asymmetry(s) == 5.0);
  const auto m = distance_matrix(s);
  CHECK(m.n == 2);
  CHECK(m.data == std::vector<double>{0, 5, 5, 0});
  CHECK(global_asymmetry(stats_of({{1, 2}, {1, 2}, {1, 2}})) == 0.0);
  CHECK_THROWS_AS(global_asymmetry(stats_of({{1, 2}})), DomainError);
  CHECK(distance_matrix(stats_of({{7, 8}})).data == std::vector<double>{0});

  // Across-origins reading: sum over components of the variance across origins.
  CHECK(origin_divergence(s, DivergenceMode::kAcrossOrigins) == doctest::Approx(2.25 + 4.0).epsilon(1e-15));
}

TEST_CASE("metrics match brute-force oracles on random inputs") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    const std::size_t dim = 1 + rng.below(10);
    const auto means = oracle::random_matrix(rng, k, dim, -3.0, 3.0);
    const auto s = stats_of(means);
    CHECK(std::abs(origin_divergence(s) - oracle::divergence(means)) < 1e-9);
    CHECK(std::abs(global_asymmetry(s) - oracle::global_asymmetry(means)) < 1e-9);
    const auto m = distance_matrix(s);
    double off = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(m.at(i, i) == 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(std::abs(m.at(i, j) - oracle::euclid(means[i], means[j])) < 1e-9);
        CHECK(m.at(i, j) == m.at(j, i));
        if (i != j) off += m.at(i, j);
        for (std::size_t l = 0; l < k; ++l) CHECK(m.at(i, l) <= m.at(i, j) + m.at(j, l) + 1e-9);
      }
    }
    CHECK(std::abs(off / static_cast<double>(k * (k - 1)) - global_asymmetry(s)) < 1e-9);
  }
}

TEST_CASE("invariances of the asymmetry metrics") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto means = oracle::random_matrix(rng, 5, 4, -2.0, 2.0);
    const auto base = stats_of(means);
    const double a = global_asymmetry(base);
    const double d = origin_divergence(base);

    const auto rotated = stats_of(rotate_plane(means, 0, 2, rng.uniform(0.1, 3.0)));
    CHECK(std::abs(global_asymmetry(rotated) - a) < 1e-9);

    auto permuted = means;
    for (auto& v : permuted) std::swap(v[1], v[3]);
    CHECK(std::abs(origin_divergence(stats_of(permuted)) - d) < 1e-12);

    auto uniform_shift = means;
    for (auto& v : uniform_shift) {
      for (double& x : v) x += 1.75;
    }
    CHECK(std::abs(global_asymmetry(stats_of(uniform_shift)) - a) < 1e-9);
    CHECK(std::abs(origin_divergence(stats_of(uniform_shift)) - d) < 1e-9);

    auto skew_shift = means;
    const std::vector<double> c{0.0, 1.0, -2.0, 3.0};
    for (auto& v : skew_shift) {
      for (std::size_t i = 0; i < 4; ++i) v[i] += c[i];
    }
    const auto shifted = stats_of(skew_shift);
    CHECK(std::abs(global_asymmetry(shifted) - a) < 1e-9);
    const auto m0 = distance_matrix(base), m1 = distance_matrix(shifted);
    for (std::size_t i = 0; i < m0.data.size(); ++i) CHECK(std::abs(m0.data[i] - m1.data[i]) < 1e-9);
    CHECK(std::abs(origin_divergence(shifted) - d) > 1e-6);
  }
}

TEST_CASE("project_2d preserves an embedded plane") {
  Rng rng(4);
  // Orthonormal u, v in R^5.
  const std::vector<double> u{0.6, 0.0, 0.8, 0.0, 0.0};
  const std::vector<double> v{0.0, 0.0, 0.0, 0.6, -0.8};
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 12; ++i) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-2, 2);
    std::vector<double> p(5, 1.5);
    for (int d = 0; d < 5; ++d) p[d] += a * u[d] + b * v[d];
    pts.push_back(p);
  }
  const auto proj = project_2d(pts);
  REQUIRE(proj.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double dp = std::hypot(proj[i][0] - proj[j][0], proj[i][1] - proj[j][1]);
      CHECK(std::abs(dp - oracle::euclid(pts[i], pts[j])) < 1e-9);
    }
  }

  auto doubled = pts;
  doubled.insert(doubled.end(), pts.begin(), pts.end());
  const auto pd = project_2d(doubled);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(std::abs(pd[i][0] - proj[i][0]) < 1e-9);
    CHECK(std::abs(pd[i][1] - proj[i][1]) < 1e-9);
  }

  const std::vector<std::vector<double>> same(4, std::vector<double>{1.0, 2.0, 3.0});
  CHECK_THROWS_AS(project_2d(same), DomainError);
  CHECK_THROWS_AS(project_2d(std::vector<std::vector<double>>{{1.0, 2.0}}), DomainError);
}

TEST_CASE("project_2d axis variances equal the top covariance eigenvalues") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = oracle::random_matrix(rng, 10, 6);
    // Stretch the cloud so the leading eigenvalues are well separated.
    for (auto& p : pts) {
      p[0] *= 4.0;
      p[3] *= 2.5;
    }
    std::vector<double> mean(6, 0.0);
    for (const auto& p : pts) {
      for (int d = 0; d < 6; ++d) mean[d] += p[d] / 10.0;
    }
    std::vector<std::vector<double>> cov(6, std::vector<double>(6, 0.0));
    for (const auto& p : pts) {
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) cov[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]) / 10.0;
      }
    }
    const auto eig = oracle::top_eigenvalues(cov, 2);
    const auto proj = project_2d(pts);
    for (int axis = 0; axis < 2; ++axis) {
      std::vector<double> col;
      for (const auto& q : proj) col.push_back(q[axis]);
      CHECK(std::abs(oracle::pop_variance(col) - eig[axis]) < 1e-9 * std::max(1.0, eig[axis]));
    }
  }
}

TEST_CASE("report serialization") {
  AsymmetryReport r;
  r.meta = {"grid_uniform", 7, "abc"};
  r.stats = stats_of({{0, 0}, {3, 4}});
  r.origin_divergence = origin_divergence(r.stats);
  r.global_asymmetry = global_asymmetry(r.stats);
  r.distances = distance_matrix(r.stats);
  r.projection = {{1.0, 2.0}, {-1.0, 0.5}};
  r.projection_origin = {0, 1};
  const auto doc = report_to_json(r);
  CHECK(doc["global_asymmetry"] == 5.0);
  CHECK(doc["distance_matrix"].size() == 4);
  const auto csv = projection_csv(r);
  CHECK(csv.rfind("x,y,origin\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
