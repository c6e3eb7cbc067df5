#pragma once

// Joint objective (reconstruction, origin contrast, shared consistency,
// origin-mean orthogonality), analytic gradients, and the Adam training loop
// with global-norm clipping and early stopping.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asymcity/encoder.hpp"
#include "asymcity/trajectories.hpp"

namespace asymcity {

enum class ContrastiveForm {
  kStandard,  // same origin: d^2, different origin: max(0, m - d)^2
  kLiteral,   // max(0, d - m + [same origin]) as printed in the source formula
};

struct TrainConfig {
  int epochs = 80;
  int batch_size = 16;
  double learning_rate = 0.002;
  double margin = 1.0;
  double lambda_recon = 1.0;
  double lambda_contrast = 0.5;
  double lambda_shared = 0.1;
  double lambda_ortho = 0.01;
  double clip_norm = 1.0;
  int early_stop_patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ContrastiveForm contrastive_form = ContrastiveForm::kStandard;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct LossComponents {
  double total = 0.0;
  double recon = 0.0;
  double contrast = 0.0;
  double shared = 0.0;
  double ortho = 0.0;
};

double loss_recon(std::span<const double> recon, std::span<const double> target);
double loss_contrastive(std::span<const std::span<const double>> specific,
                        std::span<const int> origins, double margin,
                        ContrastiveForm form = ContrastiveForm::kStandard);
double loss_shared(std::span<const std::span<const double>> shared);
double loss_ortho(std::span<const std::span<const double>> specific, std::span<const int> origins);

/// Weighted four-term objective over a batch of encoder outputs.
LossComponents total_loss(std::span<const ForwardOutput> outputs,
                          std::span<const std::span<const double>> targets,
                          std::span<const int> origins, const TrainConfig& cfg);

/// A batch item: a seq_len x F feature matrix and its origin label.
struct Sample {
  std::span<const double> features;
  int origin = 0;
};

std::vector<double> flatten(const FeatureSequence& features);

struct GradientResult {
  LossComponents loss;
  Gradients grads;
};

/// Exact gradient of total_loss with respect to every parameter.
GradientResult gradients(const EncoderParams& params, std::span<const Sample> batch,
                         const TrainConfig& cfg);

/// Scales `grads` in place so its global norm is at most `clip_norm`.
/// Returns the norm before clipping.
double clip_gradients(Gradients& grads, double clip_norm);

struct EpochLog {
  int epoch = 0;  // 1-based
  LossComponents train;  // mean over the epoch's steps
  double val_total = 0.0;
  double grad_norm = 0.0;        // mean pre-clip norm over steps
  double max_clipped_norm = 0.0;  // largest post-clip norm over steps
  int steps = 0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int stopping_epoch = 0;
  int best_epoch = 0;
  double best_val = 0.0;
  double normalized_recon_error = 0.0;
  int total_steps = 0;
};

/// Ordered mini-batches of dataset indices for one epoch; every batch holds
/// items from at least two origins whenever the index set allows it.
std::vector<std::vector<std::size_t>> make_batches(const Dataset& dataset,
                                                   std::span<const std::size_t> indices,
                                                   int batch_size, std::uint64_t seed);

struct TrainResult {
  EncoderParams params;  // best-validation parameters
  TrainingLog log;
};

EncoderParams initial_params(const EncoderConfig& enc, const TrainConfig& cfg);
TrainResult train(const Dataset& dataset, const EncoderConfig& enc, const TrainConfig& cfg);
TrainResult train(const Dataset& dataset, EncoderParams init, const TrainConfig& cfg);

/// Validation MSE divided by the population variance of every feature value
/// in the dataset.
double normalized_recon_error(const EncoderParams& params, const Dataset& dataset);

/// Loss of a whole index subset evaluated as one batch.
LossComponents evaluate(const EncoderParams& params, const Dataset& dataset,
                        std::span<const std::size_t> indices, const TrainConfig& cfg);

std::string training_log_csv(const TrainingLog& log);

}  // namespace asymcity
