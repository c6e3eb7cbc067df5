#include "asymcity/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asymcity/error.hpp"
#include "asymcity/kernels.hpp"
#include "asymcity/rng.hpp"

namespace asymcity {
namespace {

constexpr const char* kTensorNames[kTensorCount] = {
    "lstm_fwd.w_ih", "lstm_fwd.w_hh",     "lstm_fwd.bias",  "lstm_bwd.w_ih",  "lstm_bwd.w_hh",
    "lstm_bwd.bias", "origin_embedding",  "fusion.w1",      "fusion.b1",      "fusion.w2",
    "fusion.b2",     "decoder.w1",        "decoder.b1",     "decoder.w2",     "decoder.b2",
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool is_bias(Tensor t) {
  switch (t) {
    case Tensor::kFwdBias:
    case Tensor::kBwdBias:
    case Tensor::kFusionB1:
    case Tensor::kFusionB2:
    case Tensor::kDecoderB1:
    case Tensor::kDecoderB2:
      return true;
    default:
      return false;
  }
}

// Runs one LSTM direction. Outputs are stored in processing order.
void run_direction(const EncoderParams& p, int dir, std::span<const double> x,
                   std::vector<double>& gates, std::vector<double>& cells,
                   std::vector<double>& states, std::span<double> hidden_out) {
  const auto& cfg = p.config();
  const std::size_t h = cfg.lstm_hidden;
  const std::size_t f = cfg.input_dim;
  const std::size_t len = cfg.seq_len;
  const auto w_ih = p[dir == 0 ? Tensor::kFwdInput : Tensor::kBwdInput];
  const auto w_hh = p[dir == 0 ? Tensor::kFwdHidden : Tensor::kBwdHidden];
  const auto bias = p[dir == 0 ? Tensor::kFwdBias : Tensor::kBwdBias];

  gates.assign(len * 4 * h, 0.0);
  cells.assign(len * h, 0.0);
  states.assign(len * h, 0.0);
  std::vector<double> zero(h, 0.0);
  for (std::size_t s = 0; s < len; ++s) {
    const std::size_t t = dir == 0 ? s : len - 1 - s;
    std::span<double> g(gates.data() + s * 4 * h, 4 * h);
    std::copy(bias.begin(), bias.end(), g.begin());
    kernels::gemv(w_ih, 4 * h, f, x.subspan(t * f, f), g);
    std::span<const double> h_prev = s == 0 ? std::span<const double>(zero)
                                            : std::span<const double>(states.data() + (s - 1) * h, h);
    std::span<const double> c_prev = s == 0 ? std::span<const double>(zero)
                                            : std::span<const double>(cells.data() + (s - 1) * h, h);
    kernels::gemv(w_hh, 4 * h, h, h_prev, g);
    double* c = cells.data() + s * h;
    double* hs = states.data() + s * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double in = sigmoid(g[j]);
      const double forget = sigmoid(g[h + j]);
      const double cand = std::tanh(g[2 * h + j]);
      const double out = sigmoid(g[3 * h + j]);
      g[j] = in;
      g[h + j] = forget;
      g[2 * h + j] = cand;
      g[3 * h + j] = out;
      c[j] = forget * c_prev[j] + in * cand;
      hs[j] = out * std::tanh(c[j]);
    }
    std::copy(hs, hs + h, hidden_out.begin() + t * 2 * h + dir * h);
  }
}

void backward_direction(const EncoderParams& p, int dir, const ForwardTrace& tr,
                        std::span<const double> d_hidden, Gradients& grads) {
  const auto& cfg = p.config();
  const std::size_t h = cfg.lstm_hidden;
  const std::size_t f = cfg.input_dim;
  const std::size_t len = cfg.seq_len;
  const Tensor t_ih = dir == 0 ? Tensor::kFwdInput : Tensor::kBwdInput;
  const Tensor t_hh = dir == 0 ? Tensor::kFwdHidden : Tensor::kBwdHidden;
  const Tensor t_b = dir == 0 ? Tensor::kFwdBias : Tensor::kBwdBias;
  const auto w_hh = p[t_hh];
  auto g_ih = grads[t_ih];
  auto g_hh = grads[t_hh];
  auto g_b = grads[t_b];

  const auto& gates = tr.gates[dir];
  const auto& cells = tr.cells[dir];
  const auto& states = tr.states[dir];
  std::vector<double> dh_carry(h, 0.0);
  std::vector<double> dc_carry(h, 0.0);
  std::vector<double> da(4 * h);
  std::vector<double> zero(h, 0.0);
  for (std::size_t s = len; s-- > 0;) {
    const std::size_t t = dir == 0 ? s : len - 1 - s;
    const double* g = gates.data() + s * 4 * h;
    const double* c = cells.data() + s * h;
    const double* c_prev = s == 0 ? zero.data() : cells.data() + (s - 1) * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double in = g[j];
      const double forget = g[h + j];
      const double cand = g[2 * h + j];
      const double out = g[3 * h + j];
      const double dh = d_hidden[t * 2 * h + dir * h + j] + dh_carry[j];
      const double tanh_c = std::tanh(c[j]);
      const double d_out = dh * tanh_c;
      const double dc = dc_carry[j] + dh * out * (1.0 - tanh_c * tanh_c);
      da[j] = dc * cand * in * (1.0 - in);
      da[h + j] = dc * c_prev[j] * forget * (1.0 - forget);
      da[2 * h + j] = dc * in * (1.0 - cand * cand);
      da[3 * h + j] = d_out * out * (1.0 - out);
      dc_carry[j] = dc * forget;
    }
    kernels::axpy(1.0, da, g_b);
    kernels::ger(g_ih, 4 * h, f, da, std::span<const double>(tr.input).subspan(t * f, f));
    std::span<const double> h_prev =
        s == 0 ? std::span<const double>(zero) : std::span<const double>(states.data() + (s - 1) * h, h);
    kernels::ger(g_hh, 4 * h, h, da, h_prev);
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    kernels::gemv_t(w_hh, 4 * h, h, da, dh_carry);
  }
}

}  // namespace

void validate(const EncoderConfig& cfg) {
  if (cfg.input_dim < 1) throw ParameterError("input_dim", "must be >= 1");
  if (cfg.seq_len < 1) throw ParameterError("seq_len", "must be >= 1");
  if (cfg.lstm_hidden < 1) throw ParameterError("lstm_hidden", "must be >= 1");
  if (cfg.origin_embed_dim != 2 * cfg.lstm_hidden) {
    throw ParameterError("origin_embed_dim", "must equal 2 * lstm_hidden");
  }
  if (cfg.latent_dim < 2) throw ParameterError("latent_dim", "must be >= 2");
  if (cfg.shared_dim < 1 || cfg.shared_dim >= cfg.latent_dim) {
    throw ParameterError("shared_dim", "must lie in [1, latent_dim)");
  }
  if (cfg.fusion_hidden < 1) throw ParameterError("fusion_hidden", "must be >= 1");
  if (cfg.decoder_hidden < 1) throw ParameterError("decoder_hidden", "must be >= 1");
  if (cfg.n_origins < 1) throw ParameterError("n_origins", "must be >= 1");
}

nlohmann::json to_json(const EncoderConfig& cfg) {
  return {{"input_dim", cfg.input_dim},           {"seq_len", cfg.seq_len},
          {"lstm_hidden", cfg.lstm_hidden},       {"origin_embed_dim", cfg.origin_embed_dim},
          {"latent_dim", cfg.latent_dim},         {"shared_dim", cfg.shared_dim},
          {"fusion_hidden", cfg.fusion_hidden},   {"decoder_hidden", cfg.decoder_hidden},
          {"n_origins", cfg.n_origins}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  EncoderConfig cfg;
  auto read = [&](const char* key, int& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_integer()) throw ParseError(path + "/" + key, "expected an integer");
    dst = j.at(key).get<int>();
  };
  read("input_dim", cfg.input_dim);
  read("seq_len", cfg.seq_len);
  read("lstm_hidden", cfg.lstm_hidden);
  read("origin_embed_dim", cfg.origin_embed_dim);
  read("latent_dim", cfg.latent_dim);
  read("shared_dim", cfg.shared_dim);
  read("fusion_hidden", cfg.fusion_hidden);
  read("decoder_hidden", cfg.decoder_hidden);
  read("n_origins", cfg.n_origins);
  if (!j.contains("origin_embed_dim")) cfg.origin_embed_dim = 2 * cfg.lstm_hidden;
  return cfg;
}

ParamSet::ParamSet(const EncoderConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  const std::size_t h = cfg.lstm_hidden;
  const std::size_t f = cfg.input_dim;
  const std::size_t shapes[kTensorCount][2] = {
      {4 * h, f},
      {4 * h, h},
      {4 * h, 1},
      {4 * h, f},
      {4 * h, h},
      {4 * h, 1},
      {static_cast<std::size_t>(cfg.n_origins), static_cast<std::size_t>(cfg.origin_embed_dim)},
      {static_cast<std::size_t>(cfg.fusion_hidden), 2 * h + cfg.origin_embed_dim},
      {static_cast<std::size_t>(cfg.fusion_hidden), 1},
      {static_cast<std::size_t>(cfg.latent_dim), static_cast<std::size_t>(cfg.fusion_hidden)},
      {static_cast<std::size_t>(cfg.latent_dim), 1},
      {static_cast<std::size_t>(cfg.decoder_hidden), static_cast<std::size_t>(cfg.latent_dim)},
      {static_cast<std::size_t>(cfg.decoder_hidden), 1},
      {static_cast<std::size_t>(cfg.seq_len) * f, static_cast<std::size_t>(cfg.decoder_hidden)},
      {static_cast<std::size_t>(cfg.seq_len) * f, 1},
  };
  std::size_t offset = 0;
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    slots_[i] = {kTensorNames[i], shapes[i][0], shapes[i][1], offset};
    offset += slots_[i].size();
  }
  values_.assign(offset, 0.0);
}

std::span<double> ParamSet::operator[](Tensor t) {
  const auto& s = slot(t);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamSet::operator[](Tensor t) const {
  const auto& s = slot(t);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

void ParamSet::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams params(cfg);
  Rng rng(seed);
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    const auto t = static_cast<Tensor>(i);
    const auto& s = params.slot(t);
    auto data = params[t];
    if (t == Tensor::kOriginEmbedding) {
      for (double& v : data) v = rng.normal(0.0, 0.1);
    } else if (is_bias(t)) {
      std::fill(data.begin(), data.end(), 0.0);
      if (t == Tensor::kFwdBias || t == Tensor::kBwdBias) {
        const std::size_t h = cfg.lstm_hidden;
        std::fill(data.begin() + h, data.begin() + 2 * h, 1.0);
      }
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      for (double& v : data) v = rng.uniform(-bound, bound);
    }
  }
  return params;
}

std::vector<double> bilstm(const EncoderParams& params, std::span<const double> features) {
  const auto& cfg = params.config();
  if (features.size() != static_cast<std::size_t>(cfg.seq_len) * cfg.input_dim) {
    throw DomainError("bilstm: expected " + std::to_string(cfg.seq_len) + "x" +
                      std::to_string(cfg.input_dim) + " features, got " +
                      std::to_string(features.size()) + " values");
  }
  std::vector<double> hidden(static_cast<std::size_t>(cfg.seq_len) * cfg.context_dim());
  std::vector<double> gates, cells, states;
  for (int dir = 0; dir < 2; ++dir) run_direction(params, dir, features, gates, cells, states, hidden);
  return hidden;
}

AttentionResult attention(std::span<const double> hidden, std::size_t rows,
                          std::span<const double> key, std::size_t scale_dim) {
  const std::size_t width = key.size();
  AttentionResult res;
  res.alpha.resize(rows);
  res.context.assign(width, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(scale_dim));
  double max_score = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < rows; ++t) {
    res.alpha[t] = kernels::dot(hidden.subspan(t * width, width), key) * scale;
    max_score = std::max(max_score, res.alpha[t]);
  }
  double total = 0.0;
  for (double& a : res.alpha) {
    a = std::exp(a - max_score);
    total += a;
  }
  for (std::size_t t = 0; t < rows; ++t) {
    res.alpha[t] /= total;
    kernels::axpy(res.alpha[t], hidden.subspan(t * width, width), res.context);
  }
  return res;
}

ForwardTrace forward_traced(const EncoderParams& params, std::span<const double> features,
                            int origin) {
  const auto& cfg = params.config();
  if (origin < 0 || origin >= cfg.n_origins) {
    throw DomainError("forward: origin index " + std::to_string(origin) + " outside [0, " +
                      std::to_string(cfg.n_origins) + ")");
  }
  if (features.size() != static_cast<std::size_t>(cfg.seq_len) * cfg.input_dim) {
    throw DomainError("forward: feature matrix has the wrong shape");
  }
  ForwardTrace tr;
  tr.origin = origin;
  tr.input.assign(features.begin(), features.end());
  auto& out = tr.out;
  const std::size_t width = cfg.context_dim();
  out.hidden.assign(static_cast<std::size_t>(cfg.seq_len) * width, 0.0);
  for (int dir = 0; dir < 2; ++dir) {
    run_direction(params, dir, tr.input, tr.gates[dir], tr.cells[dir], tr.states[dir], out.hidden);
  }

  const auto embedding = params[Tensor::kOriginEmbedding].subspan(
      static_cast<std::size_t>(origin) * cfg.origin_embed_dim, cfg.origin_embed_dim);
  auto att = attention(out.hidden, cfg.seq_len, embedding, cfg.origin_embed_dim);
  out.alpha = std::move(att.alpha);
  out.context = std::move(att.context);

  tr.fusion_input = out.context;
  tr.fusion_input.insert(tr.fusion_input.end(), embedding.begin(), embedding.end());
  const auto b1 = params[Tensor::kFusionB1];
  tr.fusion_pre.assign(b1.begin(), b1.end());
  kernels::gemv(params[Tensor::kFusionW1], cfg.fusion_hidden, tr.fusion_input.size(),
                tr.fusion_input, tr.fusion_pre);
  std::vector<double> act(tr.fusion_pre.size());
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = std::max(tr.fusion_pre[i], 0.0);
  const auto b2 = params[Tensor::kFusionB2];
  out.latent.z.assign(b2.begin(), b2.end());
  out.latent.shared_dim = cfg.shared_dim;
  kernels::gemv(params[Tensor::kFusionW2], cfg.latent_dim, cfg.fusion_hidden, act, out.latent.z);

  const auto c1 = params[Tensor::kDecoderB1];
  tr.decoder_pre.assign(c1.begin(), c1.end());
  kernels::gemv(params[Tensor::kDecoderW1], cfg.decoder_hidden, cfg.latent_dim, out.latent.z,
                tr.decoder_pre);
  std::vector<double> dec_act(tr.decoder_pre.size());
  for (std::size_t i = 0; i < dec_act.size(); ++i) dec_act[i] = std::max(tr.decoder_pre[i], 0.0);
  const auto c2 = params[Tensor::kDecoderB2];
  out.recon.assign(c2.begin(), c2.end());
  kernels::gemv(params[Tensor::kDecoderW2], out.recon.size(), cfg.decoder_hidden, dec_act,
                out.recon);
  return tr;
}

ForwardOutput forward(const EncoderParams& params, std::span<const double> features, int origin) {
  return forward_traced(params, features, origin).out;
}

void backward(const EncoderParams& params, const ForwardTrace& tr,
              std::span<const double> d_recon, std::span<const double> d_latent,
              Gradients& grads) {
  const auto& cfg = params.config();
  const std::size_t width = cfg.context_dim();
  const std::size_t de = cfg.origin_embed_dim;
  const std::size_t out_dim = static_cast<std::size_t>(cfg.seq_len) * cfg.input_dim;

  // Decoder.
  std::vector<double> dec_act(tr.decoder_pre.size());
  for (std::size_t i = 0; i < dec_act.size(); ++i) dec_act[i] = std::max(tr.decoder_pre[i], 0.0);
  kernels::axpy(1.0, d_recon, grads[Tensor::kDecoderB2]);
  kernels::ger(grads[Tensor::kDecoderW2], out_dim, cfg.decoder_hidden, d_recon, dec_act);
  std::vector<double> d_dec(cfg.decoder_hidden, 0.0);
  kernels::gemv_t(params[Tensor::kDecoderW2], out_dim, cfg.decoder_hidden, d_recon, d_dec);
  for (std::size_t i = 0; i < d_dec.size(); ++i) {
    if (!(tr.decoder_pre[i] > 0.0)) d_dec[i] = 0.0;
  }
  kernels::axpy(1.0, d_dec, grads[Tensor::kDecoderB1]);
  kernels::ger(grads[Tensor::kDecoderW1], cfg.decoder_hidden, cfg.latent_dim, d_dec, tr.out.latent.z);
  std::vector<double> dz(d_latent.begin(), d_latent.end());
  kernels::gemv_t(params[Tensor::kDecoderW1], cfg.decoder_hidden, cfg.latent_dim, d_dec, dz);

  // Fusion.
  std::vector<double> act(tr.fusion_pre.size());
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = std::max(tr.fusion_pre[i], 0.0);
  kernels::axpy(1.0, dz, grads[Tensor::kFusionB2]);
  kernels::ger(grads[Tensor::kFusionW2], cfg.latent_dim, cfg.fusion_hidden, dz, act);
  std::vector<double> d_act(cfg.fusion_hidden, 0.0);
  kernels::gemv_t(params[Tensor::kFusionW2], cfg.latent_dim, cfg.fusion_hidden, dz, d_act);
  for (std::size_t i = 0; i < d_act.size(); ++i) {
    if (!(tr.fusion_pre[i] > 0.0)) d_act[i] = 0.0;
  }
  kernels::axpy(1.0, d_act, grads[Tensor::kFusionB1]);
  kernels::ger(grads[Tensor::kFusionW1], cfg.fusion_hidden, tr.fusion_input.size(), d_act,
               tr.fusion_input);
  std::vector<double> d_in(tr.fusion_input.size(), 0.0);
  kernels::gemv_t(params[Tensor::kFusionW1], cfg.fusion_hidden, tr.fusion_input.size(), d_act, d_in);
  const std::span<const double> d_context(d_in.data(), width);
  std::vector<double> d_embed(d_in.begin() + width, d_in.end());

  // Attention.
  const auto embedding =
      params[Tensor::kOriginEmbedding].subspan(static_cast<std::size_t>(tr.origin) * de, de);
  const double scale = 1.0 / std::sqrt(static_cast<double>(de));
  const std::size_t len = cfg.seq_len;
  const std::span<const double> hidden(tr.out.hidden);
  std::vector<double> d_hidden(len * width, 0.0);
  std::vector<double> d_alpha(len);
  double weighted = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    d_alpha[t] = kernels::dot(hidden.subspan(t * width, width), d_context);
    weighted += tr.out.alpha[t] * d_alpha[t];
  }
  for (std::size_t t = 0; t < len; ++t) {
    std::span<double> row(d_hidden.data() + t * width, width);
    kernels::axpy(tr.out.alpha[t], d_context, row);
    const double d_score = tr.out.alpha[t] * (d_alpha[t] - weighted) * scale;
    kernels::axpy(d_score, embedding, row);
    kernels::axpy(d_score, hidden.subspan(t * width, width), d_embed);
  }
  kernels::axpy(1.0, d_embed, grads[Tensor::kOriginEmbedding].subspan(static_cast<std::size_t>(tr.origin) * de, de));

  for (int dir = 0; dir < 2; ++dir) backward_direction(params, dir, tr, d_hidden, grads);
}

nlohmann::json checkpoint_to_json(const EncoderParams& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    const auto t = static_cast<Tensor>(i);
    const auto& s = params.slot(t);
    const auto data = params[t];
    tensors.push_back({{"name", s.name},
                       {"shape", {s.rows, s.cols}},
                       {"data", std::vector<double>(data.begin(), data.end())}});
  }
  return {{"format", "asymcity-checkpoint"},
          {"version", 1},
          {"config", to_json(params.config())},
          {"tensors", tensors}};
}

EncoderParams checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "asymcity-checkpoint") {
    throw ParseError("/format", "not an asymcity checkpoint");
  }
  if (!doc.contains("config")) throw ParseError("/config", "missing field");
  EncoderParams params(encoder_config_from_json(doc.at("config"), "/config"));
  if (!doc.contains("tensors") || !doc.at("tensors").is_array()) {
    throw ParseError("/tensors", "expected an array");
  }
  const auto& tensors = doc.at("tensors");
  std::vector<bool> seen(kTensorCount, false);
  for (std::size_t n = 0; n < tensors.size(); ++n) {
    const std::string path = "/tensors/" + std::to_string(n);
    const auto& entry = tensors[n];
    if (!entry.is_object() || !entry.contains("name") || !entry.at("name").is_string()) {
      throw ParseError(path + "/name", "expected a tensor name");
    }
    const auto name = entry.at("name").get<std::string>();
    std::size_t idx = kTensorCount;
    for (std::size_t i = 0; i < kTensorCount; ++i) {
      if (name == kTensorNames[i]) idx = i;
    }
    if (idx == kTensorCount) throw ParseError(path + "/name", "unknown tensor '" + name + "'");
    const auto t = static_cast<Tensor>(idx);
    const auto& s = params.slot(t);
    const auto& shape = entry.value("shape", nlohmann::json::array());
    if (!shape.is_array() || shape.size() != 2 || shape[0] != s.rows || shape[1] != s.cols) {
      throw ParseError(path + "/shape", "shape does not match config for '" + name + "'");
    }
    const auto& data = entry.value("data", nlohmann::json::array());
    if (!data.is_array() || data.size() != s.size()) {
      throw ParseError(path + "/data", "expected " + std::to_string(s.size()) + " values");
    }
    auto dst = params[t];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!data[i].is_number()) throw ParseError(path + "/data/" + std::to_string(i), "expected a number");
      dst[i] = data[i].get<double>();
    }
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    if (!seen[i]) throw ParseError("/tensors", std::string("missing tensor '") + kTensorNames[i] + "'");
  }
  return params;
}

}  // namespace asymcity
