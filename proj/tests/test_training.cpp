#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "asymcity/error.hpp"
#include "asymcity/kernels.hpp"
#include "asymcity/rng.hpp"
#include "asymcity/training.hpp"
#include "asymcity/trajectories.hpp"
#include "oracles.hpp"

using namespace asymcity;

namespace {

std::vector<std::span<const double>> spans(const std::vector<std::vector<double>>& rows) {
  return {rows.begin(), rows.end()};
}

TrainConfig only(double recon, double contrast, double shared, double ortho) {
  TrainConfig cfg;
  cfg.lambda_recon = recon;
  cfg.lambda_contrast = contrast;
  cfg.lambda_shared = shared;
  cfg.lambda_ortho = ortho;
  return cfg;
}

// Random tiny-config dataset with `per_origin` trajectories per origin.
Dataset synthetic_dataset(const EncoderConfig& enc, int per_origin, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  for (int k = 0; k < enc.n_origins; ++k) ds.origins.origins.push_back(k);
  for (int k = 0; k < enc.n_origins; ++k) {
    for (int i = 0; i < per_origin; ++i) {
      Trajectory t;
      t.origin_index = k;
      for (int s = 0; s < enc.seq_len; ++s) {
        t.nodes.push_back(k);
        t.features.push_back({rng.uniform(0.2, 1.0) * (k + 1) / enc.n_origins, rng.uniform(-1.0, 1.0)});
      }
      t.split = i % 4 == 3 ? Split::kValidation : Split::kTrain;
      ds.trajectories.push_back(std::move(t));
    }
  }
  return ds;
}

struct Batch {
  std::vector<std::vector<double>> features;
  std::vector<int> origins;
};

Batch random_batch(Rng& rng, const EncoderConfig& enc, std::size_t n) {
  Batch b;
  b.features = oracle::random_matrix(rng, n, static_cast<std::size_t>(enc.seq_len * enc.input_dim));
  for (std::size_t i = 0; i < n; ++i) b.origins.push_back(static_cast<int>(i % enc.n_origins));
  return b;
}

std::vector<Sample> samples(const Batch& b) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < b.features.size(); ++i) out.push_back({b.features[i], b.origins[i]});
  return out;
}

}  // namespace

TEST_CASE("loss_recon examples") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(loss_recon(a, a) == 0.0);
  const std::vector<double> b{2, 3, 4, 5};
  CHECK(loss_recon(b, a) == 1.0);
  const std::vector<double> c{0.5, -1.0, 2.0, 0.0};
  const std::vector<double> d{1.5, 1.0, 2.0, -3.0};
  CHECK(loss_recon(c, d) == doctest::Approx((1.0 + 4.0 + 0.0 + 9.0) / 4.0).epsilon(1e-15));
  CHECK_THROWS_AS(loss_recon(a, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("loss_contrastive examples") {
  std::vector<std::vector<double>> z{{0.3, 0.4}, {0.3, 0.4}};
  CHECK(loss_contrastive(spans(z), std::vector<int>{0, 0}, 1.0) == 0.0);
  z = {{0.0, 0.0}, {0.6, 0.8}};
  CHECK(loss_contrastive(spans(z), std::vector<int>{0, 1}, 1.0) == 0.0);
  z = {{0.0, 0.0}, {0.3, 0.4}};
  CHECK(loss_contrastive(spans(z), std::vector<int>{0, 1}, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
  z = {{0.0, 0.0}};
  CHECK_THROWS_AS(loss_contrastive(spans(z), std::vector<int>{0}, 1.0), DomainError);

  // Literal form: max(0, d - m + [same]).
  z = {{0.0, 0.0}, {0.3, 0.4}};
  CHECK(loss_contrastive(spans(z), std::vector<int>{0, 0}, 1.0, ContrastiveForm::kLiteral) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(loss_contrastive(spans(z), std::vector<int>{0, 1}, 1.0, ContrastiveForm::kLiteral) == 0.0);
  z = {{0.0, 0.0}, {3.0, 4.0}};
  CHECK(loss_contrastive(spans(z), std::vector<int>{0, 1}, 1.0, ContrastiveForm::kLiteral) ==
        doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("loss_shared and loss_ortho examples") {
  std::vector<std::vector<double>> s{{1, 2}, {1, 2}, {1, 2}};
  CHECK(loss_shared(spans(s)) == 0.0);
  s = {{0.0}, {2.0}};
  CHECK(loss_shared(spans(s)) == 1.0);

  std::vector<std::vector<double>> z{{1, 0}, {0, 1}};
  CHECK(loss_ortho(spans(z), std::vector<int>{0, 1}) == 0.0);
  z = {{1, 0}, {1, 0}};
  CHECK(loss_ortho(spans(z), std::vector<int>{0, 1}) == 1.0);
  z = {{1, 0}, {3, 2}};
  CHECK(loss_ortho(spans(z), std::vector<int>{4, 4}) == 0.0);
}

TEST_CASE("loss components match independent oracles on random inputs") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(15);
    const std::size_t dim = 1 + rng.below(8);
    const auto z = oracle::random_matrix(rng, n, dim, -1.5, 1.5);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(4));
    const double m = rng.uniform(0.2, 2.0);
    CHECK(std::abs(loss_contrastive(spans(z), labels, m) - oracle::contrastive(z, labels, m)) < 1e-9);
    CHECK(std::abs(loss_shared(spans(z)) - oracle::shared(z)) < 1e-9);
    CHECK(std::abs(loss_ortho(spans(z), labels) - oracle::ortho(z, labels)) < 1e-9);
    const auto a = oracle::random_matrix(rng, 1, dim * 3)[0];
    const auto b = oracle::random_matrix(rng, 1, dim * 3)[0];
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(loss_recon(a, b) - mse / static_cast<double>(a.size())) < 1e-9);
  }
}

TEST_CASE("total_loss recombines the components") {
  const EncoderConfig enc = oracle::tiny_config();
  const auto p = init_params(enc, 2);
  Rng rng(12);
  const auto batch = random_batch(rng, enc, 6);
  std::vector<ForwardOutput> outs;
  for (std::size_t i = 0; i < batch.features.size(); ++i) outs.push_back(forward(p, batch.features[i], batch.origins[i]));
  const auto targets = spans(batch.features);

  CHECK(total_loss(outs, targets, batch.origins, only(0, 0, 0, 0)).total == 0.0);

  double recon = 0.0;
  std::vector<std::vector<double>> shared, specific;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    recon += loss_recon(outs[i].recon, batch.features[i]);
    const auto& z = outs[i].latent;
    shared.emplace_back(z.shared().begin(), z.shared().end());
    specific.emplace_back(z.specific().begin(), z.specific().end());
  }
  recon /= static_cast<double>(outs.size());
  CHECK(std::abs(total_loss(outs, targets, batch.origins, only(1, 0, 0, 0)).total - recon) < 1e-12);

  const TrainConfig cfg;
  const auto lc = total_loss(outs, targets, batch.origins, cfg);
  const double c = oracle::contrastive(specific, batch.origins, cfg.margin);
  const double s = oracle::shared(shared);
  const double o = oracle::ortho(specific, batch.origins);
  CHECK(std::abs(lc.recon - recon) < 1e-12);
  CHECK(std::abs(lc.contrast - c) < 1e-12);
  CHECK(std::abs(lc.shared - s) < 1e-12);
  CHECK(std::abs(lc.ortho - o) < 1e-12);
  CHECK(std::abs(lc.total - (recon + 0.5 * c + 0.1 * s + 0.01 * o)) < 1e-12);
}

TEST_CASE("analytic gradient of the full objective matches finite differences") {
  const EncoderConfig enc = oracle::tiny_config();
  Rng rng(21);
  for (auto form : {ContrastiveForm::kStandard, ContrastiveForm::kLiteral}) {
    auto p = init_params(enc, 7);
    const auto batch = random_batch(rng, enc, 4);
    TrainConfig cfg;
    cfg.contrastive_form = form;
    cfg.margin = 3.0;  // keeps the hinge active for the different-origin pairs
    const auto res = oracle::finite_difference_check(p, batch.features, batch.origins, cfg);
    CHECK(res.checked == p.size());
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradients are linear in the loss weights") {
  const EncoderConfig enc = oracle::tiny_config();
  const auto p = init_params(enc, 3);
  Rng rng(4);
  const auto batch = random_batch(rng, enc, 5);
  const auto one = gradients(p, samples(batch), only(1, 0, 0, 0)).grads;
  const auto two = gradients(p, samples(batch), only(2, 0, 0, 0)).grads;
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(two.values()[i] == 2.0 * one.values()[i]);
}

TEST_CASE("gradients vanish at a stationary point") {
  const EncoderConfig enc = oracle::tiny_config();
  ParamSet p(enc);
  p.fill(0.0);
  Batch b;
  b.features.assign(4, std::vector<double>(enc.seq_len * enc.input_dim, 0.0));
  b.origins = {0, 1, 0, 1};
  // Zero weights give z = 0 and recon = 0 = target; shared is collapsed and
  // the specific means are zero.
  const auto res = gradients(p, samples(b), only(1, 0, 0.1, 0.01));
  CHECK(res.loss.total == 0.0);
  for (double g : res.grads.values()) CHECK(g == 0.0);
}

TEST_CASE("clip_gradients bounds the global norm") {
  const EncoderConfig enc = oracle::tiny_config();
  ParamSet g(enc);
  Rng rng(5);
  for (double& v : g.values()) v = rng.uniform(-1.0, 1.0);
  const double norm = std::sqrt(std::inner_product(g.values().begin(), g.values().end(), g.values().begin(), 0.0));
  auto clipped = g;
  CHECK(clip_gradients(clipped, 1.0) == doctest::Approx(norm).epsilon(1e-12));
  const double after = std::sqrt(
      std::inner_product(clipped.values().begin(), clipped.values().end(), clipped.values().begin(), 0.0));
  CHECK(after <= 1.0 + 1e-9);
  CHECK(after == doctest::Approx(1.0).epsilon(1e-12));
  auto untouched = g;
  clip_gradients(untouched, 2.0 * norm);
  CHECK(untouched == g);
}

TEST_CASE("total loss is symmetric under origin relabeling") {
  EncoderConfig enc = oracle::tiny_config();
  enc.n_origins = 4;
  const std::size_t d = enc.origin_embed_dim;
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = init_params(enc, 100 + trial);
    const auto batch = random_batch(rng, enc, 8);
    std::vector<int> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(trial));
    auto q = p;
    for (int k = 0; k < 4; ++k) {
      const auto src = p[Tensor::kOriginEmbedding].subspan(k * d, d);
      std::copy(src.begin(), src.end(), q[Tensor::kOriginEmbedding].begin() + perm[k] * d);
    }
    std::vector<int> relabeled;
    for (int o : batch.origins) relabeled.push_back(perm[o]);
    const TrainConfig cfg;
    const double a = oracle::batch_loss(p, batch.features, batch.origins, cfg);
    const double b = oracle::batch_loss(q, batch.features, relabeled, cfg);
    CHECK(std::abs(a - b) < 1e-9);
  }
}

TEST_CASE("make_batches covers each index once with mixed origins") {
  const EncoderConfig enc = [] {
    auto c = oracle::tiny_config();
    c.n_origins = 8;
    return c;
  }();
  const Dataset ds = synthetic_dataset(enc, 10, 1);
  const auto idx = ds.indices(Split::kTrain);
  for (int bs : {2, 5, 16}) {
    const auto batches = make_batches(ds, idx, bs, 9);
    std::vector<std::size_t> seen;
    for (const auto& b : batches) {
      CHECK(b.size() >= 2);
      CHECK(static_cast<int>(b.size()) <= bs + 1);
      std::set<int> origins;
      for (auto i : b) origins.insert(ds.trajectories[i].origin_index);
      CHECK(origins.size() >= 2);
      seen.insert(seen.end(), b.begin(), b.end());
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == idx);
    CHECK(batches == make_batches(ds, idx, bs, 9));
    CHECK(batches != make_batches(ds, idx, bs, 10));
  }
}

TEST_CASE("train is deterministic and returns the best validation parameters") {
  const EncoderConfig enc = oracle::tiny_config();
  const Dataset ds = synthetic_dataset(enc, 12, 2);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 4;
  cfg.early_stop_patience = 3;
  cfg.seed = 77;
  const auto a = train(ds, enc, cfg);
  const auto b = train(ds, enc, cfg);
  CHECK(a.params == b.params);
  CHECK(training_log_csv(a.log) == training_log_csv(b.log));
  REQUIRE_FALSE(a.log.epochs.empty());
  CHECK(a.log.stopping_epoch == static_cast<int>(a.log.epochs.size()));
  CHECK(a.log.stopping_epoch <= cfg.epochs);
  double min_val = 1e300;
  for (const auto& e : a.log.epochs) {
    min_val = std::min(min_val, e.val_total);
    CHECK(e.max_clipped_norm <= cfg.clip_norm + 1e-9);
  }
  CHECK(a.log.best_val == min_val);
  const auto val = ds.indices(Split::kValidation);
  CHECK(evaluate(a.params, ds, val, cfg).total == a.log.best_val);
  CHECK(a.log.epochs.back().train.total < a.log.epochs.front().train.total);
  CHECK(training_log_csv(a.log).rfind("epoch,total,recon,contrast,shared,ortho,val_total,grad_norm\n", 0) == 0);
}

TEST_CASE("one epoch with one batch performs exactly one update") {
  const EncoderConfig enc = oracle::tiny_config();
  const Dataset ds = synthetic_dataset(enc, 4, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = 5;
  const auto init = initial_params(enc, cfg);
  const auto res = train(ds, init, cfg);
  REQUIRE(res.log.epochs.size() == 1);
  CHECK(res.log.epochs[0].steps == 1);
  CHECK(res.log.total_steps == 1);

  // Reproduce the single step by hand.
  const auto idx = ds.indices(Split::kTrain);
  const auto order = make_batches(ds, idx, cfg.batch_size, derive_seed(cfg.seed, "shuffle") + 1);
  REQUIRE(order.size() == 1);
  std::vector<std::vector<double>> flat;
  for (auto i : order[0]) flat.push_back(flatten(ds.trajectories[i].features));
  std::vector<Sample> batch;
  for (std::size_t j = 0; j < order[0].size(); ++j) batch.push_back({flat[j], ds.trajectories[order[0][j]].origin_index});
  auto g = gradients(init, batch, cfg).grads;
  clip_gradients(g, cfg.clip_norm);
  auto expected = init;
  std::vector<double> m(init.size(), 0.0), v(init.size(), 0.0);
  kernels::adam({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, 1.0 - cfg.beta1, 1.0 - cfg.beta2},
                expected.values(), g.values(), m, v);
  CHECK(res.params == expected);
  CHECK_FALSE(res.params == init);
}

TEST_CASE("normalized_recon_error endpoints") {
  const EncoderConfig enc = oracle::tiny_config();
  Dataset ds;
  ds.origins.origins = {0, 1};
  const FeatureSequence pattern{{0.2, 0.0}, {0.9, 0.5}, {0.4, -0.5}, {1.0, 0.0}};
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 3; ++i) ds.trajectories.push_back({k, {0, 1, 2, 3}, pattern, Split::kValidation});
  }
  ParamSet p(enc);
  p.fill(0.0);
  const auto flat = flatten(pattern);
  std::copy(flat.begin(), flat.end(), p[Tensor::kDecoderB2].begin());
  CHECK(normalized_recon_error(p, ds) == 0.0);

  const double mean = std::accumulate(flat.begin(), flat.end(), 0.0) / static_cast<double>(flat.size());
  std::fill(p[Tensor::kDecoderB2].begin(), p[Tensor::kDecoderB2].end(), mean);
  CHECK(normalized_recon_error(p, ds) == doctest::Approx(1.0).epsilon(1e-12));

  Dataset flat_ds = ds;
  for (auto& t : flat_ds.trajectories) t.features.assign(4, {0.5, 0.5});
  CHECK_THROWS_AS(normalized_recon_error(p, flat_ds), DomainError);
}

TEST_CASE("train config validation names the field") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  try {
    validate(cfg);
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    CHECK(e.field() == "learning_rate");
  }
}
