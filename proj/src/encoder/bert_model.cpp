#include "mensp/encoder/bert_model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "mensp/errors.hpp"
#include "mensp/simd/kernels.hpp"
#include "mensp/util.hpp"

namespace mensp::bert {

// ---------------------------------------------------------------------------
// Config

void Config::validate() const {
  if (vocab_size <= 0 || hidden_size <= 0 || num_layers < 0 || num_heads <= 0 ||
      intermediate_size <= 0 || max_position_embeddings <= 0 || type_vocab_size <= 0)
    throw BackendError("BERT config has a non-positive dimension");
  if (hidden_size % num_heads != 0)
    throw BackendError("hidden_size " + std::to_string(hidden_size) + " is not divisible by " +
                       std::to_string(num_heads) + " attention heads");
  if (hidden_act != "gelu" && hidden_act != "gelu_new" && hidden_act != "gelu_pytorch_tanh" &&
      hidden_act != "relu")
    throw BackendError("unsupported hidden_act '" + hidden_act + "'");
}

Config Config::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError(std::string("malformed config.json: ") + e.what());
  }
  auto need = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_number_integer())
      throw BackendError(std::string("config.json lacks integer '") + key + "'");
    return doc[key].get<int>();
  };
  Config c;
  c.vocab_size = need("vocab_size");
  c.hidden_size = need("hidden_size");
  c.num_layers = need("num_hidden_layers");
  c.num_heads = need("num_attention_heads");
  c.intermediate_size = need("intermediate_size");
  c.max_position_embeddings = need("max_position_embeddings");
  if (doc.contains("type_vocab_size")) c.type_vocab_size = doc["type_vocab_size"].get<int>();
  if (doc.contains("layer_norm_eps")) c.layer_norm_eps = doc["layer_norm_eps"].get<float>();
  if (doc.contains("hidden_act") && doc["hidden_act"].is_string())
    c.hidden_act = doc["hidden_act"].get<std::string>();
  c.validate();
  return c;
}

std::string Config::to_json_text() const {
  nlohmann::json doc = {
      {"architectures", {"BertForPreTraining"}},
      {"model_type", "bert"},
      {"vocab_size", vocab_size},
      {"hidden_size", hidden_size},
      {"num_hidden_layers", num_layers},
      {"num_attention_heads", num_heads},
      {"intermediate_size", intermediate_size},
      {"max_position_embeddings", max_position_embeddings},
      {"type_vocab_size", type_vocab_size},
      {"layer_norm_eps", layer_norm_eps},
      {"hidden_act", hidden_act},
  };
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Params

namespace {

std::size_t numel(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<std::string> aliases(const std::string& name) {
  std::vector<std::string> out{name};
  auto legacy = [](std::string n) {
    for (auto [from, to] : {std::pair{".LayerNorm.weight", ".LayerNorm.gamma"},
                            std::pair{".LayerNorm.bias", ".LayerNorm.beta"}}) {
      const std::string f = from;
      if (n.size() >= f.size() && n.compare(n.size() - f.size(), f.size(), f) == 0)
        return n.substr(0, n.size() - f.size()) + to;
    }
    return n;
  };
  if (legacy(name) != name) out.push_back(legacy(name));
  if (name.rfind("bert.", 0) == 0) {
    out.push_back(name.substr(5));
    if (legacy(name) != name) out.push_back(legacy(name.substr(5)));
  }
  return out;
}

}  // namespace

Params Params::from_tensors(const TensorMap& tensors, const Config& config) {
  config.validate();
  Params p;
  p.config = config;
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  p.for_each([&](const std::string& name, std::vector<float>& buf, const std::vector<std::int64_t>& shape) {
    const Tensor* found = nullptr;
    for (const auto& alias : aliases(name)) {
      auto it = tensors.find(alias);
      if (it != tensors.end()) {
        found = &it->second;
        break;
      }
    }
    if (!found) {
      if (name.rfind("cls.seq_relationship", 0) == 0)
        throw BackendError("checkpoint has no next-sentence-prediction head (missing " + name + ")");
      throw BackendError("checkpoint is missing tensor " + name);
    }
    if (found->shape != shape || found->data.size() != numel(shape))
      throw BackendError("tensor " + name + " has an unexpected shape");
    buf = found->data;
  });
  return p;
}

TensorMap Params::to_tensors() const {
  TensorMap out;
  for_each([&](const std::string& name, const std::vector<float>& buf, const std::vector<std::int64_t>& shape) {
    out.emplace(name, Tensor{shape, buf});
  });
  return out;
}

Params Params::zeros_like(const Params& other) {
  Params p;
  p.config = other.config;
  p.layers.resize(other.layers.size());
  p.for_each([](const std::string&, std::vector<float>& buf, const std::vector<std::int64_t>& shape) {
    buf.assign(numel(shape), 0.0f);
  });
  return p;
}

Params Params::random(const Config& config, std::uint64_t seed, float stddev) {
  config.validate();
  Params p;
  p.config = config;
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  Rng rng(seed);
  p.for_each([&](const std::string& name, std::vector<float>& buf, const std::vector<std::int64_t>& shape) {
    const std::size_t n = numel(shape);
    const bool is_gain = name.find("LayerNorm.weight") != std::string::npos;
    const bool is_bias = shape.size() == 1 && !is_gain;
    buf.resize(n);
    for (auto& v : buf)
      v = is_gain ? 1.0f : is_bias ? 0.0f : static_cast<float>(rng.normal() * stddev);
  });
  return p;
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const std::vector<float>& buf, const auto&) { n += buf.size(); });
  return n;
}

bool is_head_tensor(const std::string& name) {
  return name.rfind("bert.pooler.", 0) == 0 || name.rfind("cls.seq_relationship.", 0) == 0;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void linear(const float* x, std::size_t rows, std::size_t in, const std::vector<float>& w,
            const std::vector<float>& b, std::size_t out, float* y) {
  simd::active().gemm_nt(rows, out, in, x, in, w.data(), in, y, out, false);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) y[r * out + o] += b[o];
}

void linear_backward(const float* x, std::size_t rows, std::size_t in, const std::vector<float>& w,
                     std::size_t out, const float* dy, std::vector<float>& dw, std::vector<float>& db,
                     float* dx, bool accumulate_dx) {
  const auto& k = simd::active();
  k.gemm_tn(out, in, rows, dy, out, x, in, dw.data(), in, true);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) db[o] += dy[r * out + o];
  if (dx) k.gemm_nn(rows, in, out, dy, out, w.data(), in, dx, in, accumulate_dx);
}

void layer_norm(const float* x, std::size_t rows, std::size_t h, const std::vector<float>& g,
                const std::vector<float>& b, float eps, float* hat, float* rstd, float* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * h;
    double mean = 0.0;
    for (std::size_t i = 0; i < h; ++i) mean += xr[i];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t i = 0; i < h; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(h);
    const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
    rstd[r] = rs;
    for (std::size_t i = 0; i < h; ++i) {
      const float xh = static_cast<float>(xr[i] - mean) * rs;
      hat[r * h + i] = xh;
      y[r * h + i] = xh * g[i] + b[i];
    }
  }
}

void layer_norm_backward(const float* dy, const float* hat, const float* rstd, std::size_t rows,
                         std::size_t h, const std::vector<float>& g, std::vector<float>& dg,
                         std::vector<float>& db, float* dx) {
  const float inv_h = 1.0f / static_cast<float>(h);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* dyr = dy + r * h;
    const float* hr = hat + r * h;
    float sum1 = 0.0f, sum2 = 0.0f;
    for (std::size_t i = 0; i < h; ++i) {
      const float dxh = dyr[i] * g[i];
      sum1 += dxh;
      sum2 += dxh * hr[i];
      dg[i] += dyr[i] * hr[i];
      db[i] += dyr[i];
    }
    for (std::size_t i = 0; i < h; ++i) {
      const float dxh = dyr[i] * g[i];
      dx[r * h + i] = rstd[r] * (dxh - sum1 * inv_h - hr[i] * sum2 * inv_h);
    }
  }
}

constexpr float kInvSqrt2 = 0.70710678118654752440f;
constexpr float kInvSqrt2Pi = 0.39894228040143267794f;
constexpr float kSqrt2OverPi = 0.79788456080286535588f;

float activate(const std::string& act, float x) {
  if (act == "gelu") return 0.5f * x * (1.0f + std::erf(x * kInvSqrt2));
  if (act == "relu") return x > 0.0f ? x : 0.0f;
  const float u = kSqrt2OverPi * (x + 0.044715f * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(u));
}

float activate_grad(const std::string& act, float x) {
  if (act == "gelu") return 0.5f * (1.0f + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5f * x * x);
  if (act == "relu") return x > 0.0f ? 1.0f : 0.0f;
  const float u = kSqrt2OverPi * (x + 0.044715f * x * x * x);
  const float t = std::tanh(u);
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * kSqrt2OverPi * (1.0f + 3.0f * 0.044715f * x * x);
}

void softmax_rows(float* s, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = s + r * cols;
    const float mx = *std::max_element(row, row + cols);
    float sum = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    const float inv = 1.0f / sum;
    for (std::size_t c = 0; c < cols; ++c) row[c] *= inv;
  }
}

}  // namespace

void forward_encoder(const Params& p, std::span<const std::int32_t> ids,
                     std::span<const std::int8_t> segments, Activations& act) {
  const auto& c = p.config;
  const std::size_t t_len = ids.size();
  const std::size_t h = static_cast<std::size_t>(c.hidden_size);
  const std::size_t inter = static_cast<std::size_t>(c.intermediate_size);
  const std::size_t heads = static_cast<std::size_t>(c.num_heads);
  const std::size_t dh = h / heads;
  if (segments.size() != t_len) throw BackendError("token and segment sequences differ in length");
  if (t_len == 0) throw BackendError("empty input sequence");
  if (t_len > static_cast<std::size_t>(c.max_position_embeddings))
    throw BackendError("sequence of " + std::to_string(t_len) + " tokens exceeds max_position_embeddings");

  act.length = t_len;
  act.ids.assign(ids.begin(), ids.end());
  act.segments.assign(segments.begin(), segments.end());

  std::vector<float> x(t_len * h);
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto id = ids[t];
    const auto seg = segments[t];
    if (id < 0 || id >= c.vocab_size) throw BackendError("token id out of vocabulary range");
    if (seg < 0 || seg >= c.type_vocab_size) throw BackendError("segment id out of range");
    const float* we = p.word_emb.data() + static_cast<std::size_t>(id) * h;
    const float* pe = p.pos_emb.data() + t * h;
    const float* te = p.type_emb.data() + static_cast<std::size_t>(seg) * h;
    for (std::size_t i = 0; i < h; ++i) x[t * h + i] = we[i] + pe[i] + te[i];
  }
  act.emb_hat.resize(t_len * h);
  act.emb_rstd.resize(t_len);
  std::vector<float> cur(t_len * h);
  layer_norm(x.data(), t_len, h, p.emb_ln_g, p.emb_ln_b, c.layer_norm_eps, act.emb_hat.data(),
             act.emb_rstd.data(), cur.data());

  const auto& kern = simd::active();
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  act.layers.resize(p.layers.size());
  std::vector<float> tmp(t_len * h);
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& lp = p.layers[li];
    auto& la = act.layers[li];
    la.input = cur;
    la.q.resize(t_len * h);
    la.k.resize(t_len * h);
    la.v.resize(t_len * h);
    linear(cur.data(), t_len, h, lp.q_w, lp.q_b, h, la.q.data());
    linear(cur.data(), t_len, h, lp.k_w, lp.k_b, h, la.k.data());
    linear(cur.data(), t_len, h, lp.v_w, lp.v_b, h, la.v.data());

    la.probs.resize(heads * t_len * t_len);
    la.context.resize(t_len * h);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      float* s = la.probs.data() + hd * t_len * t_len;
      kern.gemm_nt(t_len, t_len, dh, la.q.data() + hd * dh, h, la.k.data() + hd * dh, h, s, t_len, false);
      for (std::size_t i = 0; i < t_len * t_len; ++i) s[i] *= scale;
      softmax_rows(s, t_len, t_len);
      kern.gemm_nn(t_len, dh, t_len, s, t_len, la.v.data() + hd * dh, h, la.context.data() + hd * dh, h,
                   false);
    }

    linear(la.context.data(), t_len, h, lp.attn_out_w, lp.attn_out_b, h, tmp.data());
    for (std::size_t i = 0; i < t_len * h; ++i) tmp[i] += cur[i];
    la.ln1_hat.resize(t_len * h);
    la.ln1_rstd.resize(t_len);
    la.hidden1.resize(t_len * h);
    layer_norm(tmp.data(), t_len, h, lp.ln1_g, lp.ln1_b, c.layer_norm_eps, la.ln1_hat.data(),
               la.ln1_rstd.data(), la.hidden1.data());

    la.inter_pre.resize(t_len * inter);
    la.inter_act.resize(t_len * inter);
    linear(la.hidden1.data(), t_len, h, lp.inter_w, lp.inter_b, inter, la.inter_pre.data());
    for (std::size_t i = 0; i < t_len * inter; ++i) la.inter_act[i] = activate(c.hidden_act, la.inter_pre[i]);

    linear(la.inter_act.data(), t_len, inter, lp.out_w, lp.out_b, h, tmp.data());
    for (std::size_t i = 0; i < t_len * h; ++i) tmp[i] += la.hidden1[i];
    la.ln2_hat.resize(t_len * h);
    la.ln2_rstd.resize(t_len);
    layer_norm(tmp.data(), t_len, h, lp.ln2_g, lp.ln2_b, c.layer_norm_eps, la.ln2_hat.data(),
               la.ln2_rstd.data(), cur.data());
  }
  act.hidden = std::move(cur);
}

std::vector<float> pool(const Params& p, std::span<const float> cls_hidden) {
  const std::size_t h = static_cast<std::size_t>(p.config.hidden_size);
  std::vector<float> pooled(h);
  simd::active().gemm_nt(1, h, h, cls_hidden.data(), h, p.pooler_w.data(), h, pooled.data(), h, false);
  for (std::size_t i = 0; i < h; ++i) pooled[i] = std::tanh(pooled[i] + p.pooler_b[i]);
  return pooled;
}

std::array<float, 2> nsp_logits(const Params& p, std::span<const float> pooled) {
  const std::size_t h = static_cast<std::size_t>(p.config.hidden_size);
  std::array<float, 2> logits{};
  for (std::size_t c = 0; c < 2; ++c)
    logits[c] = simd::active().dot_f32(p.nsp_w.data() + c * h, pooled.data(), h) + p.nsp_b[c];
  return logits;
}

double is_next_probability(const std::array<float, 2>& logits) {
  // softmax over two classes, index 0 = "is next"
  const double diff = static_cast<double>(logits[1]) - static_cast<double>(logits[0]);
  return 1.0 / (1.0 + std::exp(diff));
}

// ---------------------------------------------------------------------------
// Backward

void backward_head(const Params& p, std::span<const float> cls_hidden, std::span<const float> pooled,
                   const std::array<float, 2>& d_logits, Params& grads, std::span<float> d_cls) {
  const std::size_t h = static_cast<std::size_t>(p.config.hidden_size);
  std::vector<float> d_pooled(h, 0.0f);
  for (std::size_t c = 0; c < 2; ++c) {
    grads.nsp_b[c] += d_logits[c];
    for (std::size_t i = 0; i < h; ++i) {
      grads.nsp_w[c * h + i] += d_logits[c] * pooled[i];
      d_pooled[i] += p.nsp_w[c * h + i] * d_logits[c];
    }
  }
  std::vector<float> d_pre(h);
  for (std::size_t i = 0; i < h; ++i) d_pre[i] = d_pooled[i] * (1.0f - pooled[i] * pooled[i]);
  const auto& k = simd::active();
  for (std::size_t o = 0; o < h; ++o) {
    grads.pooler_b[o] += d_pre[o];
    k.axpy_f32(d_pre[o], cls_hidden.data(), grads.pooler_w.data() + o * h, h);
  }
  if (!d_cls.empty()) k.gemm_nn(1, h, h, d_pre.data(), h, p.pooler_w.data(), h, d_cls.data(), h, false);
}

void backward_encoder(const Params& p, const Activations& act, std::vector<float> d_hidden, Params& grads) {
  const auto& c = p.config;
  const std::size_t t_len = act.length;
  const std::size_t h = static_cast<std::size_t>(c.hidden_size);
  const std::size_t inter = static_cast<std::size_t>(c.intermediate_size);
  const std::size_t heads = static_cast<std::size_t>(c.num_heads);
  const std::size_t dh = h / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  const auto& kern = simd::active();

  std::vector<float> d_sum(t_len * h), d_hidden1(t_len * h), d_inter(t_len * inter), d_ctx(t_len * h);
  std::vector<float> dq(t_len * h), dk(t_len * h), dv(t_len * h), d_probs(t_len * t_len);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& lp = p.layers[li];
    auto& lg = grads.layers[li];
    const auto& la = act.layers[li];

    // out = LN2(hidden1 + ffn(hidden1))
    layer_norm_backward(d_hidden.data(), la.ln2_hat.data(), la.ln2_rstd.data(), t_len, h, lp.ln2_g, lg.ln2_g,
                        lg.ln2_b, d_sum.data());
    linear_backward(la.inter_act.data(), t_len, inter, lp.out_w, h, d_sum.data(), lg.out_w, lg.out_b,
                    d_inter.data(), false);
    for (std::size_t i = 0; i < t_len * inter; ++i) d_inter[i] *= activate_grad(c.hidden_act, la.inter_pre[i]);
    d_hidden1 = d_sum;
    linear_backward(la.hidden1.data(), t_len, h, lp.inter_w, inter, d_inter.data(), lg.inter_w, lg.inter_b,
                    d_hidden1.data(), true);

    // hidden1 = LN1(input + attn(input))
    layer_norm_backward(d_hidden1.data(), la.ln1_hat.data(), la.ln1_rstd.data(), t_len, h, lp.ln1_g, lg.ln1_g,
                        lg.ln1_b, d_sum.data());
    linear_backward(la.context.data(), t_len, h, lp.attn_out_w, h, d_sum.data(), lg.attn_out_w, lg.attn_out_b,
                    d_ctx.data(), false);

    for (std::size_t hd = 0; hd < heads; ++hd) {
      const float* probs = la.probs.data() + hd * t_len * t_len;
      const float* dctx_h = d_ctx.data() + hd * dh;
      kern.gemm_nt(t_len, t_len, dh, dctx_h, h, la.v.data() + hd * dh, h, d_probs.data(), t_len, false);
      kern.gemm_tn(t_len, dh, t_len, probs, t_len, dctx_h, h, dv.data() + hd * dh, h, false);
      for (std::size_t i = 0; i < t_len; ++i) {
        float* row = d_probs.data() + i * t_len;
        const float* prow = probs + i * t_len;
        const float dotp = kern.dot_f32(row, prow, t_len);
        for (std::size_t j = 0; j < t_len; ++j) row[j] = prow[j] * (row[j] - dotp) * scale;
      }
      kern.gemm_nn(t_len, dh, t_len, d_probs.data(), t_len, la.k.data() + hd * dh, h, dq.data() + hd * dh, h,
                   false);
      kern.gemm_tn(t_len, dh, t_len, d_probs.data(), t_len, la.q.data() + hd * dh, h, dk.data() + hd * dh, h,
                   false);
    }

    // d_input = residual + the three projections
    d_hidden = d_sum;
    linear_backward(la.input.data(), t_len, h, lp.q_w, h, dq.data(), lg.q_w, lg.q_b, d_hidden.data(), true);
    linear_backward(la.input.data(), t_len, h, lp.k_w, h, dk.data(), lg.k_w, lg.k_b, d_hidden.data(), true);
    linear_backward(la.input.data(), t_len, h, lp.v_w, h, dv.data(), lg.v_w, lg.v_b, d_hidden.data(), true);
  }

  layer_norm_backward(d_hidden.data(), act.emb_hat.data(), act.emb_rstd.data(), t_len, h, p.emb_ln_g,
                      grads.emb_ln_g, grads.emb_ln_b, d_sum.data());
  for (std::size_t t = 0; t < t_len; ++t) {
    const float* d = d_sum.data() + t * h;
    kern.axpy_f32(1.0f, d, grads.word_emb.data() + static_cast<std::size_t>(act.ids[t]) * h, h);
    kern.axpy_f32(1.0f, d, grads.pos_emb.data() + t * h, h);
    kern.axpy_f32(1.0f, d, grads.type_emb.data() + static_cast<std::size_t>(act.segments[t]) * h, h);
  }
}

}  // namespace mensp::bert
