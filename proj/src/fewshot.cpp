#include "mensp/fewshot.hpp"

#include <cmath>
#include <sstream>

#include "mensp/encoder/bert_backend.hpp"
#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

std::string strategy_name(StrategyKind kind) { return kind == StrategyKind::random ? "random" : "manual-file"; }

void check_samples_per_level(const std::vector<LabeledResponse>& samples, int k, int num_levels) {
  std::vector<int> counts(static_cast<std::size_t>(num_levels), 0);
  for (const auto& s : samples) {
    if (s.gold.value < 0 || s.gold.value >= num_levels)
      throw DataError("sample '" + s.response_id + "' has grade " + std::to_string(s.gold.value) +
                      " outside 0.." + std::to_string(num_levels - 1));
    ++counts[static_cast<std::size_t>(s.gold.value)];
  }
  std::string problems;
  for (int g = 0; g < num_levels; ++g) {
    const int c = counts[static_cast<std::size_t>(g)];
    if (c == k) continue;
    if (!problems.empty()) problems += ", ";
    problems += "level " + std::to_string(g) + (c == 0 ? " missing" : " has " + std::to_string(c));
  }
  if (!problems.empty())
    throw DataError("samples must contain exactly " + std::to_string(k) + " responses per level: " + problems);
}

std::vector<LabeledResponse> select_samples(const std::vector<LabeledResponse>& pool, int k,
                                            const SampleStrategy& strategy, std::uint64_t seed,
                                            const AssessmentItem& item) {
  if (k < 0) throw ConfigError("shots per level must be non-negative");
  if (strategy.kind == StrategyKind::random) return few_shot_split(pool, k, seed).train;
  if (!strategy.manual_path) throw ConfigError("manual-file strategy needs a sample file");
  auto samples = load_responses(*strategy.manual_path, item);
  try {
    check_samples_per_level(samples, k, item.num_levels);
  } catch (const DataError& e) {
    throw DataError(strategy.manual_path->string() + ": " + e.what());
  }
  return samples;
}

std::vector<TrainingPair> build_pairs(const std::vector<LabeledResponse>& samples, const ExemplarSet& exemplars) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(samples.size() * static_cast<std::size_t>(exemplars.num_levels()));
  for (const auto& s : samples) {
    if (s.gold.value < 0 || s.gold.value >= exemplars.num_levels())
      throw DataError("sample '" + s.response_id + "' grade is not a level of item '" + exemplars.item_id() + "'");
    for (int g = 0; g < exemplars.num_levels(); ++g)
      pairs.push_back({s.text, exemplars.text(GradeLevel{g}), s.gold.value == g ? 1 : 0});
  }
  return pairs;
}

void FineTuneConfig::validate() const {
  if (epochs <= 0) throw ConfigError("finetune.epochs must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("finetune.learning_rate must be positive");
  if (batch_size <= 0) throw ConfigError("finetune.batch_size must be positive");
}

namespace {

struct NamedBuffers {
  std::vector<std::string> names;
  std::vector<std::vector<float>*> bufs;
};

NamedBuffers buffers(bert::Params& p) {
  NamedBuffers nb;
  p.for_each([&](const std::string& name, std::vector<float>& buf, const auto&) {
    nb.names.push_back(name);
    nb.bufs.push_back(&buf);
  });
  return nb;
}

class Adam {
 public:
  Adam(const bert::Params& shape, double lr, bool head_only)
      : m_(bert::Params::zeros_like(shape)), v_(bert::Params::zeros_like(shape)), lr_(lr) {
    auto names = buffers(m_).names;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (!head_only || bert::is_head_tensor(names[i])) active_.push_back(i);
  }

  void step(bert::Params& params, bert::Params& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    auto p = buffers(params).bufs;
    auto g = buffers(grads).bufs;
    auto m = buffers(m_).bufs;
    auto v = buffers(v_).bufs;
    for (std::size_t i : active_) {
      auto& pb = *p[i];
      const auto& gb = *g[i];
      auto& mb = *m[i];
      auto& vb = *v[i];
      for (std::size_t j = 0; j < pb.size(); ++j) {
        const double gj = gb[j];
        mb[j] = static_cast<float>(kBeta1 * mb[j] + (1.0 - kBeta1) * gj);
        vb[j] = static_cast<float>(kBeta2 * vb[j] + (1.0 - kBeta2) * gj * gj);
        const double mhat = mb[j] / c1;
        const double vhat = vb[j] / c2;
        pb[j] = static_cast<float>(pb[j] - lr_ * mhat / (std::sqrt(vhat) + kEps));
      }
    }
  }

  void zero(bert::Params& grads) const {
    auto g = buffers(grads).bufs;
    for (std::size_t i : active_) std::fill(g[i]->begin(), g[i]->end(), 0.0f);
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  bert::Params m_, v_;
  double lr_;
  int t_ = 0;
  std::vector<std::size_t> active_;
};

/// Cross-entropy toward class 0 ("is next") for positives and class 1 otherwise.
/// Returns the loss and writes dLoss/dlogits scaled by `scale`.
double pair_loss(const std::array<float, 2>& logits, int label, double scale, std::array<float, 2>& d_logits) {
  const double l0 = logits[0], l1 = logits[1];
  const double mx = std::max(l0, l1);
  const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
  const int target = label == 1 ? 0 : 1;
  const double loss = lse - (target == 0 ? l0 : l1);
  const double p0 = std::exp(l0 - lse);
  d_logits[0] = static_cast<float>(scale * (p0 - (target == 0 ? 1.0 : 0.0)));
  d_logits[1] = static_cast<float>(scale * ((1.0 - p0) - (target == 1 ? 1.0 : 0.0)));
  return loss;
}

}  // namespace

FineTuneResult finetune(const std::shared_ptr<const Encoder>& backend, const std::vector<TrainingPair>& pairs,
                        const FineTuneConfig& config) {
  config.validate();
  const auto* base = dynamic_cast<const BertEncoder*>(backend.get());
  if (!base) throw UnsupportedOperation("backend '" + backend->capabilities().identifier + "' cannot be fine-tuned");
  if (pairs.empty()) throw DataError("fine-tuning needs at least one training pair");

  bert::Params params = base->params();
  bert::Params grads = bert::Params::zeros_like(params);
  const bool head_only = config.scope == TrainableScope::head_only;
  Adam adam(params, config.learning_rate, head_only);
  const std::size_t h = static_cast<std::size_t>(params.config.hidden_size);

  std::vector<EncodedPair> encoded;
  encoded.reserve(pairs.size());
  for (const auto& p : pairs) encoded.push_back(base->build_pair_input(p.response_text, p.exemplar_text));

  // The encoder is frozen under head-only training, so the [CLS] states never change.
  std::vector<std::vector<float>> cls_cache;
  if (head_only) {
    bert::Activations act;
    for (const auto& e : encoded) {
      bert::forward_encoder(params, e.token_ids, e.segment_ids, act);
      cls_cache.emplace_back(act.hidden.begin(), act.hidden.begin() + static_cast<std::ptrdiff_t>(h));
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  FineTuneResult result;
  bert::Activations act;
  std::vector<float> d_cls(h);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      adam.zero(grads);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        std::span<const float> cls;
        if (head_only) {
          cls = cls_cache[i];
        } else {
          bert::forward_encoder(params, encoded[i].token_ids, encoded[i].segment_ids, act);
          cls = std::span<const float>(act.hidden.data(), h);
        }
        const auto pooled = bert::pool(params, cls);
        const auto logits = bert::nsp_logits(params, pooled);
        std::array<float, 2> d_logits{};
        const double loss = pair_loss(logits, pairs[i].label, scale, d_logits);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "training diverged: non-finite loss at epoch " << epoch + 1 << ", pair " << i
              << " (learning rate " << config.learning_rate << ")";
          throw TrainingDiverged(msg.str());
        }
        epoch_loss += loss;
        if (head_only) {
          bert::backward_head(params, cls, pooled, d_logits, grads, {});
        } else {
          bert::backward_head(params, cls, pooled, d_logits, grads, d_cls);
          std::vector<float> d_hidden(act.length * h, 0.0f);
          std::copy(d_cls.begin(), d_cls.end(), d_hidden.begin());
          bert::backward_encoder(params, act, std::move(d_hidden), grads);
        }
      }
      adam.step(params, grads);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }
  result.backend = base->with_params(std::move(params));
  return result;
}

}  // namespace mensp
