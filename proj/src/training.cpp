#include "asymcity/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "asymcity/error.hpp"
#include "asymcity/kernels.hpp"
#include "asymcity/rng.hpp"

namespace asymcity {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ParameterError("epochs", "must be >= 1");
  if (cfg.batch_size < 2) throw ParameterError("batch_size", "must be >= 2");
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("learning_rate", "must be > 0");
  if (!(cfg.margin > 0.0)) throw ParameterError("margin", "must be > 0");
  if (!(cfg.lambda_recon >= 0.0)) throw ParameterError("lambda_recon", "must be >= 0");
  if (!(cfg.lambda_contrast >= 0.0)) throw ParameterError("lambda_contrast", "must be >= 0");
  if (!(cfg.lambda_shared >= 0.0)) throw ParameterError("lambda_shared", "must be >= 0");
  if (!(cfg.lambda_ortho >= 0.0)) throw ParameterError("lambda_ortho", "must be >= 0");
  if (!(cfg.clip_norm > 0.0)) throw ParameterError("clip_norm", "must be > 0");
  // A single epoch can never stop early, so the patience bound only applies
  // to longer runs.
  if (cfg.early_stop_patience < 1 || (cfg.epochs > 1 && cfg.early_stop_patience >= cfg.epochs)) {
    throw ParameterError("early_stop_patience", "must lie in [1, epochs)");
  }
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0)) throw ParameterError("beta1", "must lie in (0, 1)");
  if (!(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) throw ParameterError("beta2", "must lie in (0, 1)");
  if (!(cfg.epsilon > 0.0)) throw ParameterError("epsilon", "must be > 0");
}

namespace {

using Vecs = std::span<const std::span<const double>>;

// Shared machinery for the loss values and their gradients with respect to
// each item's reconstruction and latent vector.
struct BatchTerms {
  LossComponents loss;
  std::vector<std::vector<double>> d_recon;
  std::vector<std::vector<double>> d_latent;
};

double recon_term(Vecs recon, Vecs targets, std::vector<std::vector<double>>* grad, double weight) {
  const std::size_t n = recon.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = recon[i].size();
    total += kernels::sq_dist(recon[i], targets[i]) / static_cast<double>(m);
    if (grad) {
      const double coef = weight * 2.0 / static_cast<double>(m * n);
      auto& g = (*grad)[i];
      for (std::size_t j = 0; j < m; ++j) g[j] += coef * (recon[i][j] - targets[i][j]);
    }
  }
  return total / static_cast<double>(n);
}

// `offset` locates the specific block inside each gradient vector.
double contrast_term(Vecs specific, std::span<const int> origins, double margin,
                     ContrastiveForm form, std::vector<std::vector<double>>* grad,
                     std::size_t offset, double weight) {
  const std::size_t n = specific.size();
  if (n < 2) throw DomainError("loss_contrastive: batch needs at least 2 items");
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  const std::size_t dim = specific[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same = origins[i] == origins[j];
      const double d2 = kernels::sq_dist(specific[i], specific[j]);
      const double d = std::sqrt(d2);
      // coef multiplies (z_i - z_j) in the gradient w.r.t. z_i.
      double coef = 0.0;
      if (form == ContrastiveForm::kStandard) {
        if (same) {
          total += d2;
          coef = 2.0;
        } else if (d < margin) {
          const double gap = margin - d;
          total += gap * gap;
          coef = d > 0.0 ? -2.0 * gap / d : 0.0;
        }
      } else {
        const double arg = d - margin + (same ? 1.0 : 0.0);
        if (arg > 0.0) {
          total += arg;
          coef = d > 0.0 ? 1.0 / d : 0.0;
        }
      }
      if (grad && coef != 0.0) {
        const double c = weight * coef / pairs;
        auto& gi = (*grad)[i];
        auto& gj = (*grad)[j];
        for (std::size_t k = 0; k < dim; ++k) {
          const double diff = c * (specific[i][k] - specific[j][k]);
          gi[offset + k] += diff;
          gj[offset + k] -= diff;
        }
      }
    }
  }
  return total / pairs;
}

double shared_term(Vecs shared, std::vector<std::vector<double>>* grad, double weight) {
  const std::size_t n = shared.size();
  if (n == 0) return 0.0;
  const std::size_t dim = shared[0].size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& s : shared) kernels::axpy(1.0, s, mean);
  for (double& m : mean) m /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += kernels::sq_dist(shared[i], mean);
    if (grad) {
      // The mean's dependence on z_i cancels: sum_j (s_j - mean) = 0.
      const double c = weight * 2.0 / static_cast<double>(n);
      for (std::size_t k = 0; k < dim; ++k) (*grad)[i][k] += c * (shared[i][k] - mean[k]);
    }
  }
  return total / static_cast<double>(n);
}

double ortho_term(Vecs specific, std::span<const int> origins,
                  std::vector<std::vector<double>>* grad, std::size_t offset, double weight) {
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < specific.size(); ++i) members[origins[i]].push_back(i);
  if (members.size() < 2) return 0.0;
  const std::size_t dim = specific[0].size();
  std::vector<std::vector<double>> means;
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [label, idx] : members) {
    std::vector<double> mu(dim, 0.0);
    for (std::size_t i : idx) kernels::axpy(1.0, specific[i], mu);
    for (double& v : mu) v /= static_cast<double>(idx.size());
    means.push_back(std::move(mu));
    groups.push_back(&idx);
  }
  const std::size_t p_count = means.size();
  double total = 0.0;
  std::vector<std::vector<double>> d_mean(p_count, std::vector<double>(dim, 0.0));
  for (std::size_t p = 0; p < p_count; ++p) {
    for (std::size_t q = p + 1; q < p_count; ++q) {
      const double ip = kernels::dot(means[p], means[q]);
      total += ip * ip;
      kernels::axpy(2.0 * ip, means[q], d_mean[p]);
      kernels::axpy(2.0 * ip, means[p], d_mean[q]);
    }
  }
  if (grad) {
    for (std::size_t p = 0; p < p_count; ++p) {
      const double c = weight / static_cast<double>(groups[p]->size());
      for (std::size_t i : *groups[p]) {
        for (std::size_t k = 0; k < dim; ++k) (*grad)[i][offset + k] += c * d_mean[p][k];
      }
    }
  }
  return total;
}

BatchTerms batch_terms(std::span<const ForwardOutput> outputs, Vecs targets,
                       std::span<const int> origins, const TrainConfig& cfg, bool want_grads) {
  const std::size_t n = outputs.size();
  if (targets.size() != n || origins.size() != n) throw DomainError("total_loss: inconsistent batch");
  if (n == 0) throw DomainError("total_loss: empty batch");
  std::vector<std::span<const double>> recon(n), shared(n), specific(n);
  for (std::size_t i = 0; i < n; ++i) {
    recon[i] = outputs[i].recon;
    shared[i] = outputs[i].latent.shared();
    specific[i] = outputs[i].latent.specific();
    if (recon[i].size() != targets[i].size()) throw DomainError("loss_recon: shape mismatch");
  }
  const std::size_t shared_dim = outputs[0].latent.shared_dim;

  BatchTerms out;
  std::vector<std::vector<double>>* g_recon = nullptr;
  std::vector<std::vector<double>>* g_latent = nullptr;
  if (want_grads) {
    out.d_recon.resize(n);
    out.d_latent.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.d_recon[i].assign(recon[i].size(), 0.0);
      out.d_latent[i].assign(outputs[i].latent.z.size(), 0.0);
    }
    g_recon = &out.d_recon;
    g_latent = &out.d_latent;
  }
  auto& l = out.loss;
  l.recon = recon_term(recon, targets, g_recon, cfg.lambda_recon);
  l.contrast = n >= 2 ? contrast_term(specific, origins, cfg.margin, cfg.contrastive_form, g_latent,
                                      shared_dim, cfg.lambda_contrast)
                      : 0.0;
  l.shared = shared_term(shared, g_latent, cfg.lambda_shared);
  l.ortho = ortho_term(specific, origins, g_latent, shared_dim, cfg.lambda_ortho);
  l.total = cfg.lambda_recon * l.recon + cfg.lambda_contrast * l.contrast +
            cfg.lambda_shared * l.shared + cfg.lambda_ortho * l.ortho;
  return out;
}

}  // namespace

double loss_recon(std::span<const double> recon, std::span<const double> target) {
  if (recon.size() != target.size()) throw DomainError("loss_recon: shape mismatch");
  if (recon.empty()) return 0.0;
  const std::span<const double> r[1] = {recon};
  const std::span<const double> t[1] = {target};
  return recon_term(r, t, nullptr, 1.0);
}

double loss_contrastive(Vecs specific, std::span<const int> origins, double margin,
                        ContrastiveForm form) {
  if (specific.size() != origins.size()) throw DomainError("loss_contrastive: label count mismatch");
  return contrast_term(specific, origins, margin, form, nullptr, 0, 1.0);
}

double loss_shared(Vecs shared) { return shared_term(shared, nullptr, 1.0); }

double loss_ortho(Vecs specific, std::span<const int> origins) {
  if (specific.size() != origins.size()) throw DomainError("loss_ortho: label count mismatch");
  return ortho_term(specific, origins, nullptr, 0, 1.0);
}

LossComponents total_loss(std::span<const ForwardOutput> outputs, Vecs targets,
                          std::span<const int> origins, const TrainConfig& cfg) {
  return batch_terms(outputs, targets, origins, cfg, false).loss;
}

std::vector<double> flatten(const FeatureSequence& features) {
  std::vector<double> out;
  out.reserve(features.size() * 2);
  for (const auto& f : features) {
    out.push_back(f.visibility);
    out.push_back(f.curvature);
  }
  return out;
}

GradientResult gradients(const EncoderParams& params, std::span<const Sample> batch,
                         const TrainConfig& cfg) {
  std::vector<ForwardTrace> traces;
  traces.reserve(batch.size());
  for (const auto& s : batch) traces.push_back(forward_traced(params, s.features, s.origin));
  std::vector<ForwardOutput> outputs;
  outputs.reserve(batch.size());
  std::vector<std::span<const double>> targets;
  std::vector<int> origins;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    outputs.push_back(traces[i].out);
    targets.push_back(batch[i].features);
    origins.push_back(batch[i].origin);
  }
  const auto terms = batch_terms(outputs, targets, origins, cfg, true);
  GradientResult res{terms.loss, Gradients(params.config())};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    backward(params, traces[i], terms.d_recon[i], terms.d_latent[i], res.grads);
  }
  return res;
}

double clip_gradients(Gradients& grads, double clip_norm) {
  const double norm = std::sqrt(kernels::sum_sq(grads.values()));
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& g : grads.values()) g *= scale;
  }
  return norm;
}

std::vector<std::vector<std::size_t>> make_batches(const Dataset& dataset,
                                                   std::span<const std::size_t> indices,
                                                   int batch_size, std::uint64_t seed) {
  Rng rng(seed);
  auto shuffle = [&rng](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };
  std::map<int, std::vector<std::size_t>> by_origin;
  for (std::size_t idx : indices) by_origin[dataset.trajectories[idx].origin_index].push_back(idx);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [label, members] : by_origin) {
    shuffle(members);
    groups.push_back(std::move(members));
  }
  shuffle(groups);

  // Round-robin over origins so consecutive items come from different origins.
  std::vector<std::size_t> order;
  order.reserve(indices.size());
  for (std::size_t round = 0; order.size() < indices.size(); ++round) {
    for (const auto& g : groups) {
      if (round < g.size()) order.push_back(g[round]);
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = batches.back();
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  shuffle(batches);
  return batches;
}

LossComponents evaluate(const EncoderParams& params, const Dataset& dataset,
                        std::span<const std::size_t> indices, const TrainConfig& cfg) {
  std::vector<std::vector<double>> flat;
  std::vector<ForwardOutput> outputs;
  std::vector<int> origins;
  for (std::size_t idx : indices) {
    const auto& t = dataset.trajectories[idx];
    flat.push_back(flatten(t.features));
    outputs.push_back(forward(params, flat.back(), t.origin_index));
    origins.push_back(t.origin_index);
  }
  std::vector<std::span<const double>> targets(flat.begin(), flat.end());
  return total_loss(outputs, targets, origins, cfg);
}

EncoderParams initial_params(const EncoderConfig& enc, const TrainConfig& cfg) {
  return init_params(enc, derive_seed(cfg.seed, "init"));
}

TrainResult train(const Dataset& dataset, const EncoderConfig& enc, const TrainConfig& cfg) {
  return train(dataset, initial_params(enc, cfg), cfg);
}

TrainResult train(const Dataset& dataset, EncoderParams init, const TrainConfig& cfg) {
  validate(cfg);
  const auto& enc = init.config();
  if (dataset.n_origins() != enc.n_origins) {
    throw DomainError("train: dataset has " + std::to_string(dataset.n_origins()) +
                      " origins but the encoder expects " + std::to_string(enc.n_origins));
  }
  if (dataset.seq_len() != static_cast<std::size_t>(enc.seq_len)) {
    throw DomainError("train: dataset sequence length does not match encoder seq_len");
  }
  const auto train_idx = dataset.indices(Split::kTrain);
  const auto val_idx = dataset.indices(Split::kValidation);
  if (train_idx.size() < 2 || val_idx.size() < 2) {
    throw DomainError("train: need at least 2 training and 2 validation trajectories");
  }

  std::vector<std::vector<double>> flat;
  flat.reserve(dataset.trajectories.size());
  for (const auto& t : dataset.trajectories) flat.push_back(flatten(t.features));

  EncoderParams params = std::move(init);
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  TrainResult result{params, {}};
  auto& log = result.log;
  log.best_val = std::numeric_limits<double>::infinity();
  int step_count = 0;
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches =
        make_batches(dataset, train_idx, cfg.batch_size, shuffle_seed + static_cast<std::uint64_t>(epoch));
    EpochLog entry;
    entry.epoch = epoch;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<Sample> batch;
      for (std::size_t idx : batches[b]) batch.push_back({flat[idx], dataset.trajectories[idx].origin_index});
      auto res = gradients(params, batch, cfg);
      if (!std::isfinite(res.loss.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(b + 1));
      }
      const double pre = clip_gradients(res.grads, cfg.clip_norm);
      if (!std::isfinite(pre)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(b + 1));
      }
      entry.max_clipped_norm =
          std::max(entry.max_clipped_norm, std::sqrt(kernels::sum_sq(res.grads.values())));
      ++step_count;
      const kernels::AdamStep step{cfg.learning_rate,
                                   cfg.beta1,
                                   cfg.beta2,
                                   cfg.epsilon,
                                   1.0 - std::pow(cfg.beta1, step_count),
                                   1.0 - std::pow(cfg.beta2, step_count)};
      kernels::adam(step, params.values(), res.grads.values(), m, v);
      entry.train.total += res.loss.total;
      entry.train.recon += res.loss.recon;
      entry.train.contrast += res.loss.contrast;
      entry.train.shared += res.loss.shared;
      entry.train.ortho += res.loss.ortho;
      entry.grad_norm += pre;
      ++entry.steps;
    }
    const double steps = static_cast<double>(entry.steps);
    entry.train.total /= steps;
    entry.train.recon /= steps;
    entry.train.contrast /= steps;
    entry.train.shared /= steps;
    entry.train.ortho /= steps;
    entry.grad_norm /= steps;
    entry.val_total = evaluate(params, dataset, val_idx, cfg).total;
    if (!std::isfinite(entry.val_total)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    log.epochs.push_back(entry);
    log.stopping_epoch = epoch;
    if (entry.val_total < log.best_val) {
      log.best_val = entry.val_total;
      log.best_epoch = epoch;
      result.params = params;
    } else if (epoch - log.best_epoch >= cfg.early_stop_patience) {
      break;
    }
  }
  log.total_steps = step_count;
  log.normalized_recon_error = normalized_recon_error(result.params, dataset);
  return result;
}

double normalized_recon_error(const EncoderParams& params, const Dataset& dataset) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& t : dataset.trajectories) {
    for (const auto& f : t.features) {
      sum += f.visibility + f.curvature;
      count += 2;
    }
  }
  if (count == 0) throw DomainError("normalized_recon_error: empty dataset");
  const double mean = sum / static_cast<double>(count);
  double variance = 0.0;
  for (const auto& t : dataset.trajectories) {
    for (const auto& f : t.features) {
      variance += (f.visibility - mean) * (f.visibility - mean) + (f.curvature - mean) * (f.curvature - mean);
    }
  }
  variance /= static_cast<double>(count);
  if (!(variance > 0.0)) throw DomainError("normalized_recon_error: feature variance is zero");

  const auto val = dataset.indices(Split::kValidation);
  if (val.empty()) throw DomainError("normalized_recon_error: no validation trajectories");
  double mse = 0.0;
  for (std::size_t idx : val) {
    const auto target = flatten(dataset.trajectories[idx].features);
    mse += loss_recon(forward(params, target, dataset.trajectories[idx].origin_index).recon, target);
  }
  return mse / static_cast<double>(val.size()) / variance;
}

std::string training_log_csv(const TrainingLog& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,total,recon,contrast,shared,ortho,val_total,grad_norm\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.train.total << ',' << e.train.recon << ',' << e.train.contrast << ','
        << e.train.shared << ',' << e.train.ortho << ',' << e.val_total << ',' << e.grad_norm << '\n';
  }
  return out.str();
}

}  // namespace asymcity
