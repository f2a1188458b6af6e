#pragma once

// BERT encoder with pooler and next-sentence-prediction head, in plain float
// buffers. Weight layouts follow the PyTorch/HF convention: a Linear weight is
// [out_features, in_features] row-major, so y = x W^T + b.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mensp/encoder/safetensors.hpp"

namespace mensp::bert {

struct Config {
  int vocab_size = 0;
  int hidden_size = 0;
  int num_layers = 0;
  int num_heads = 0;
  int intermediate_size = 0;
  int max_position_embeddings = 0;
  int type_vocab_size = 2;
  float layer_norm_eps = 1e-12f;
  /// "gelu" (erf), "gelu_new" / "gelu_pytorch_tanh" (tanh approximation) or "relu".
  std::string hidden_act = "gelu";

  int head_dim() const { return hidden_size / num_heads; }
  void validate() const;

  /// Parses an HF-style config.json document.
  static Config from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct LayerParams {
  std::vector<float> q_w, q_b, k_w, k_b, v_w, v_b;
  std::vector<float> attn_out_w, attn_out_b, ln1_g, ln1_b;
  std::vector<float> inter_w, inter_b, out_w, out_b, ln2_g, ln2_b;
};

struct Params {
  Config config;
  std::vector<float> word_emb, pos_emb, type_emb, emb_ln_g, emb_ln_b;
  std::vector<LayerParams> layers;
  std::vector<float> pooler_w, pooler_b, nsp_w, nsp_b;

  /// Calls f(name, buffer, shape) for every tensor, in a fixed order, using
  /// the canonical checkpoint names.
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const;

  static Params from_tensors(const TensorMap& tensors, const Config& config);
  TensorMap to_tensors() const;
  static Params zeros_like(const Params& other);
  /// N(0, stddev) weights, unit LayerNorm gains, zero biases.
  static Params random(const Config& config, std::uint64_t seed, float stddev = 0.02f);

  std::size_t parameter_count() const;
};

/// Everything the backward pass needs from one forward pass over one sequence.
struct LayerActivations {
  std::vector<float> input;      // T x H
  std::vector<float> q, k, v;    // T x H
  std::vector<float> probs;      // heads x T x T
  std::vector<float> context;    // T x H
  std::vector<float> ln1_hat;    // T x H
  std::vector<float> ln1_rstd;   // T
  std::vector<float> hidden1;    // T x H
  std::vector<float> inter_pre;  // T x I
  std::vector<float> inter_act;  // T x I
  std::vector<float> ln2_hat;    // T x H
  std::vector<float> ln2_rstd;   // T
};

struct Activations {
  std::size_t length = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::int8_t> segments;
  std::vector<float> emb_hat, emb_rstd;
  std::vector<LayerActivations> layers;
  std::vector<float> hidden;  // T x H, final layer output
};

/// Runs the embedding layer and all transformer layers.
void forward_encoder(const Params& p, std::span<const std::int32_t> ids,
                     std::span<const std::int8_t> segments, Activations& act);

/// pooled = tanh(W_p h_cls + b_p)
std::vector<float> pool(const Params& p, std::span<const float> cls_hidden);

/// Two-class NSP logits; index 0 is "is next".
std::array<float, 2> nsp_logits(const Params& p, std::span<const float> pooled);

/// softmax(logits)[0]
double is_next_probability(const std::array<float, 2>& logits);

/// Accumulates head gradients (pooler + NSP classifier) into `grads`. When
/// `d_cls` is non-empty it receives dLoss/d(h_cls).
void backward_head(const Params& p, std::span<const float> cls_hidden, std::span<const float> pooled,
                   const std::array<float, 2>& d_logits, Params& grads, std::span<float> d_cls);

/// Accumulates encoder gradients given dLoss/d(final hidden states), T x H.
void backward_encoder(const Params& p, const Activations& act, std::vector<float> d_hidden, Params& grads);

// --- implementation of the visitors ---------------------------------------

namespace detail {
template <typename P, typename F>
void visit(P& p, F& f) {
  using S = std::vector<std::int64_t>;
  const auto& c = p.config;
  const std::int64_t h = c.hidden_size, in = c.intermediate_size;
  f("bert.embeddings.word_embeddings.weight", p.word_emb, S{c.vocab_size, h});
  f("bert.embeddings.position_embeddings.weight", p.pos_emb, S{c.max_position_embeddings, h});
  f("bert.embeddings.token_type_embeddings.weight", p.type_emb, S{c.type_vocab_size, h});
  f("bert.embeddings.LayerNorm.weight", p.emb_ln_g, S{h});
  f("bert.embeddings.LayerNorm.bias", p.emb_ln_b, S{h});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "bert.encoder.layer." + std::to_string(i) + ".";
    f(pre + "attention.self.query.weight", l.q_w, S{h, h});
    f(pre + "attention.self.query.bias", l.q_b, S{h});
    f(pre + "attention.self.key.weight", l.k_w, S{h, h});
    f(pre + "attention.self.key.bias", l.k_b, S{h});
    f(pre + "attention.self.value.weight", l.v_w, S{h, h});
    f(pre + "attention.self.value.bias", l.v_b, S{h});
    f(pre + "attention.output.dense.weight", l.attn_out_w, S{h, h});
    f(pre + "attention.output.dense.bias", l.attn_out_b, S{h});
    f(pre + "attention.output.LayerNorm.weight", l.ln1_g, S{h});
    f(pre + "attention.output.LayerNorm.bias", l.ln1_b, S{h});
    f(pre + "intermediate.dense.weight", l.inter_w, S{in, h});
    f(pre + "intermediate.dense.bias", l.inter_b, S{in});
    f(pre + "output.dense.weight", l.out_w, S{h, in});
    f(pre + "output.dense.bias", l.out_b, S{h});
    f(pre + "output.LayerNorm.weight", l.ln2_g, S{h});
    f(pre + "output.LayerNorm.bias", l.ln2_b, S{h});
  }
  f("bert.pooler.dense.weight", p.pooler_w, S{h, h});
  f("bert.pooler.dense.bias", p.pooler_b, S{h});
  f("cls.seq_relationship.weight", p.nsp_w, S{2, h});
  f("cls.seq_relationship.bias", p.nsp_b, S{2});
}
}  // namespace detail

template <typename F>
void Params::for_each(F&& f) {
  detail::visit(*this, f);
}

template <typename F>
void Params::for_each(F&& f) const {
  detail::visit(*this, f);
}

/// True for tensors trained under the head-only scope (pooler + NSP classifier).
bool is_head_tensor(const std::string& name);

}  // namespace mensp::bert
