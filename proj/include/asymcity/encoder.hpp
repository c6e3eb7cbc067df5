#pragma once

// Origin-conditional trajectory encoder: BiLSTM over per-step features,
// attention pooling keyed by a learned origin embedding, a fusion MLP that
// produces the latent z (split into shared and origin-specific parts), and
// an MLP decoder that reconstructs the whole feature sequence from z.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace asymcity {

struct EncoderConfig {
  int input_dim = 2;          // F
  int seq_len = 21;           // L + 1
  int lstm_hidden = 32;       // per direction
  int origin_embed_dim = 64;  // must equal 2 * lstm_hidden
  int latent_dim = 64;
  int shared_dim = 32;
  int fusion_hidden = 128;
  int decoder_hidden = 128;
  int n_origins = 8;

  int context_dim() const { return 2 * lstm_hidden; }
  int specific_dim() const { return latent_dim - shared_dim; }
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void validate(const EncoderConfig& cfg);
nlohmann::json to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j, const std::string& path = "/encoder");

enum class Tensor : int {
  kFwdInput,   // forward LSTM W_ih, 4H x F, gate rows ordered i, f, g, o
  kFwdHidden,  // forward LSTM W_hh, 4H x H
  kFwdBias,    // 4H
  kBwdInput,
  kBwdHidden,
  kBwdBias,
  kOriginEmbedding,  // K x d_e
  kFusionW1,         // fusion_hidden x (2H + d_e)
  kFusionB1,
  kFusionW2,  // d_z x fusion_hidden
  kFusionB2,
  kDecoderW1,  // decoder_hidden x d_z
  kDecoderB1,
  kDecoderW2,  // (seq_len * F) x decoder_hidden
  kDecoderB2,
  kCount,
};

inline constexpr std::size_t kTensorCount = static_cast<std::size_t>(Tensor::kCount);

struct TensorSlot {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
};

/// All learnable values in one contiguous buffer with named tensor views.
/// Gradients use the same type and layout.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  std::span<double> operator[](Tensor t);
  std::span<const double> operator[](Tensor t) const;
  const TensorSlot& slot(Tensor t) const { return slots_[static_cast<std::size_t>(t)]; }
  const std::array<TensorSlot, kTensorCount>& slots() const { return slots_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  void fill(double v);

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.cfg_ == b.cfg_ && a.values_ == b.values_;
  }

 private:
  EncoderConfig cfg_;
  std::array<TensorSlot, kTensorCount> slots_;
  std::vector<double> values_;
};

using EncoderParams = ParamSet;
using Gradients = ParamSet;

/// Glorot-uniform weights, forget-gate biases 1, other biases 0, origin
/// embeddings N(0, 0.1).
EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed);

struct LatentRepr {
  std::vector<double> z;
  int shared_dim = 0;

  std::span<const double> shared() const { return std::span<const double>(z).first(shared_dim); }
  std::span<const double> specific() const { return std::span<const double>(z).subspan(shared_dim); }
};

struct AttentionResult {
  std::vector<double> alpha;    // seq_len
  std::vector<double> context;  // 2H
};

struct ForwardOutput {
  std::vector<double> hidden;  // seq_len x 2H, row t = [forward h_t ; backward h_t]
  std::vector<double> alpha;
  std::vector<double> context;
  LatentRepr latent;
  std::vector<double> recon;  // seq_len x F
};

/// Features as a row-major seq_len x F matrix.
std::vector<double> bilstm(const EncoderParams& params, std::span<const double> features);

/// Scaled dot-product attention of the rows of `hidden` (rows x width)
/// against `key` (width); `scale_dim` is the d_e in 1/sqrt(d_e).
AttentionResult attention(std::span<const double> hidden, std::size_t rows,
                          std::span<const double> key, std::size_t scale_dim);

ForwardOutput forward(const EncoderParams& params, std::span<const double> features,
                      int origin);

/// Everything forward computes that backprop needs.
struct ForwardTrace {
  ForwardOutput out;
  int origin = 0;
  std::vector<double> input;  // seq_len x F
  // Per direction, in processing order: gate activations (4H), cell (H), hidden (H).
  std::array<std::vector<double>, 2> gates;
  std::array<std::vector<double>, 2> cells;
  std::array<std::vector<double>, 2> states;
  std::vector<double> fusion_input;  // [c ; e_k]
  std::vector<double> fusion_pre;    // before ReLU
  std::vector<double> decoder_pre;   // before ReLU
};

ForwardTrace forward_traced(const EncoderParams& params, std::span<const double> features,
                            int origin);

/// Accumulates into `grads` the parameter gradient of a scalar loss whose
/// gradients with respect to the reconstruction and latent are given.
void backward(const EncoderParams& params, const ForwardTrace& trace,
              std::span<const double> d_recon, std::span<const double> d_latent,
              Gradients& grads);

/// Self-describing checkpoint: config block plus named tensors stored as
/// shape + row-major values.
nlohmann::json checkpoint_to_json(const EncoderParams& params);
EncoderParams checkpoint_from_json(const nlohmann::json& doc);

}  // namespace asymcity
