#include <cmath>
#include <numeric>

#include "common.hpp"
#include "mensp/util.hpp"

namespace mensp {

namespace {

using detail::argmax_first;
using detail::check_width;
using detail::ClassIndex;
using detail::ConstantClassifier;
using detail::index_classes;

/// scores[c] = W[c] . x + b[c]
class LinearClassifier final : public Classifier {
 public:
  LinearClassifier(std::vector<std::vector<double>> w, std::vector<double> b, std::vector<int> labels)
      : w_(std::move(w)), b_(std::move(b)), labels_(std::move(labels)) {}

  int predict(std::span<const double> x) const override {
    check_width(x, w_.front().size());
    std::vector<double> s(b_);
    for (std::size_t c = 0; c < s.size(); ++c)
      s[c] += std::inner_product(x.begin(), x.end(), w_[c].begin(), 0.0);
    return labels_[argmax_first(s)];
  }

 private:
  std::vector<std::vector<double>> w_;
  std::vector<double> b_;
  std::vector<int> labels_;
};

void softmax_inplace(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (auto& x : v) z += (x = std::exp(x - mx));
  for (auto& x : v) x /= z;
}

class MlpClassifier final : public Classifier {
 public:
  MlpClassifier(std::vector<double> w1, std::vector<double> b1, std::vector<double> w2, std::vector<double> b2,
                std::size_t width, std::size_t hidden, std::vector<int> labels)
      : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)), width_(width),
        hidden_(hidden), labels_(std::move(labels)) {}

  int predict(std::span<const double> x) const override {
    check_width(x, width_);
    std::vector<double> h(hidden_);
    for (std::size_t j = 0; j < hidden_; ++j) {
      double a = b1_[j];
      for (std::size_t i = 0; i < width_; ++i) a += w1_[j * width_ + i] * x[i];
      h[j] = a > 0.0 ? a : 0.0;
    }
    std::vector<double> out(b2_);
    for (std::size_t c = 0; c < out.size(); ++c)
      for (std::size_t j = 0; j < hidden_; ++j) out[c] += w2_[c * hidden_ + j] * h[j];
    return labels_[argmax_first(out)];
  }

 private:
  std::vector<double> w1_, b1_, w2_, b2_;
  std::size_t width_, hidden_;
  std::vector<int> labels_;
};

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& p, const std::vector<double>& g, double lr, int t) {
    const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
    }
  }
};

}  // namespace

ClassifierPtr fit_naive_bayes(const FeatureMatrix& x, const std::vector<int>& y, const NaiveBayesParams& params) {
  if (!(params.alpha > 0.0)) throw ConfigError("naive Bayes alpha must be positive");
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  const std::size_t k = ci.count(), width = x.front().size();
  std::vector<std::vector<double>> counts(k, std::vector<double>(width, 0.0));
  std::vector<double> class_rows(k, 0.0);
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto c = static_cast<std::size_t>(ci.index[r]);
    class_rows[c] += 1.0;
    for (std::size_t i = 0; i < width; ++i) {
      if (x[r][i] < 0.0) throw DataError("naive Bayes needs non-negative features");
      counts[c][i] += x[r][i];
    }
  }
  std::vector<double> prior(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double total = std::accumulate(counts[c].begin(), counts[c].end(), 0.0) +
                         params.alpha * static_cast<double>(width);
    for (auto& v : counts[c]) v = std::log((v + params.alpha) / total);
    prior[c] = std::log(class_rows[c] / static_cast<double>(x.size()));
  }
  return std::make_shared<LinearClassifier>(std::move(counts), std::move(prior), ci.labels);
}

ClassifierPtr fit_logistic_regression(const FeatureMatrix& x, const std::vector<int>& y,
                                      const LogisticParams& params) {
  if (params.iterations < 1 || !(params.learning_rate > 0.0) || params.l2 < 0.0)
    throw ConfigError("logistic regression needs iterations >= 1, learning_rate > 0 and l2 >= 0");
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  const std::size_t k = ci.count(), width = x.front().size(), n = x.size();
  std::vector<std::vector<double>> w(k, std::vector<double>(width, 0.0));
  std::vector<double> b(k, 0.0);
  std::vector<std::vector<double>> gw(k, std::vector<double>(width));
  std::vector<double> gb(k), p(k);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < params.iterations; ++it) {
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < width; ++i) gw[c][i] = params.l2 * w[c][i];
      gb[c] = 0.0;
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < k; ++c) p[c] = b[c] + std::inner_product(x[r].begin(), x[r].end(), w[c].begin(), 0.0);
      softmax_inplace(p);
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (p[c] - (ci.index[r] == static_cast<int>(c) ? 1.0 : 0.0)) * inv_n;
        gb[c] += d;
        for (std::size_t i = 0; i < width; ++i) gw[c][i] += d * x[r][i];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      b[c] -= params.learning_rate * gb[c];
      for (std::size_t i = 0; i < width; ++i) w[c][i] -= params.learning_rate * gw[c][i];
    }
  }
  return std::make_shared<LinearClassifier>(std::move(w), std::move(b), ci.labels);
}

ClassifierPtr fit_mlp(const FeatureMatrix& x, const std::vector<int>& y, const MlpParams& params,
                      std::uint64_t seed) {
  if (params.hidden_units < 1 || params.epochs < 1 || params.batch_size < 1 || !(params.learning_rate > 0.0) ||
      params.l2 < 0.0)
    throw ConfigError("mlp needs positive hidden_units, epochs, batch_size and learning_rate");
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  const std::size_t k = ci.count(), width = x.front().size(), n = x.size();
  const std::size_t hidden = static_cast<std::size_t>(params.hidden_units);

  Rng rng(seed);
  auto glorot = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w) v = (2.0 * rng.uniform01() - 1.0) * bound;
  };
  std::vector<double> w1(hidden * width), b1(hidden, 0.0), w2(k * hidden), b2(k, 0.0);
  glorot(w1, width, hidden);
  glorot(w2, hidden, k);

  AdamState s1(w1.size()), sb1(b1.size()), s2(w2.size()), sb2(b2.size());
  std::vector<double> g1(w1.size()), gb1(b1.size()), g2(w2.size()), gb2(b2.size());
  std::vector<double> h(hidden), out(k), dh(hidden);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(params.batch_size);
  int t = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < w1.size(); ++i) g1[i] = params.l2 * w1[i];
      for (std::size_t i = 0; i < w2.size(); ++i) g2[i] = params.l2 * w2[i];
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gb2.begin(), gb2.end(), 0.0);
      for (std::size_t bi = start; bi < end; ++bi) {
        const auto& xr = x[order[bi]];
        for (std::size_t j = 0; j < hidden; ++j) {
          double a = b1[j];
          for (std::size_t i = 0; i < width; ++i) a += w1[j * width + i] * xr[i];
          h[j] = a > 0.0 ? a : 0.0;
        }
        for (std::size_t c = 0; c < k; ++c) {
          out[c] = b2[c];
          for (std::size_t j = 0; j < hidden; ++j) out[c] += w2[c * hidden + j] * h[j];
        }
        softmax_inplace(out);
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t c = 0; c < k; ++c) {
          const double d = (out[c] - (ci.index[order[bi]] == static_cast<int>(c) ? 1.0 : 0.0)) * scale;
          gb2[c] += d;
          for (std::size_t j = 0; j < hidden; ++j) {
            g2[c * hidden + j] += d * h[j];
            dh[j] += d * w2[c * hidden + j];
          }
        }
        for (std::size_t j = 0; j < hidden; ++j) {
          if (h[j] <= 0.0) continue;
          gb1[j] += dh[j];
          for (std::size_t i = 0; i < width; ++i) g1[j * width + i] += dh[j] * xr[i];
        }
      }
      ++t;
      s1.step(w1, g1, params.learning_rate, t);
      sb1.step(b1, gb1, params.learning_rate, t);
      s2.step(w2, g2, params.learning_rate, t);
      sb2.step(b2, gb2, params.learning_rate, t);
    }
  }
  return std::make_shared<MlpClassifier>(std::move(w1), std::move(b1), std::move(w2), std::move(b2), width, hidden,
                                         ci.labels);
}

ClassifierPtr fit_linear_svm(const FeatureMatrix& x, const std::vector<int>& y, const SvmParams& params,
                             std::uint64_t seed) {
  if (!(params.c > 0.0) || params.max_iterations < 1 || !(params.tolerance > 0.0))
    throw ConfigError("svm needs c > 0, max_iterations >= 1 and tolerance > 0");
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  const std::size_t k = ci.count(), width = x.front().size(), n = x.size();

  // The bias is learned as the weight of a constant 1 feature.
  std::vector<double> sqnorm(n);
  for (std::size_t r = 0; r < n; ++r)
    sqnorm[r] = std::inner_product(x[r].begin(), x[r].end(), x[r].begin(), 0.0) + 1.0;
  const double diag = 0.5 / params.c;

  Rng rng(seed);
  std::vector<std::vector<double>> w(k, std::vector<double>(width, 0.0));
  std::vector<double> b(k, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> alpha(n, 0.0);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int it = 0; it < params.max_iterations; ++it) {
      rng.shuffle(order);
      double pg_max = -INFINITY, pg_min = INFINITY;
      for (std::size_t r : order) {
        const double yi = ci.index[r] == static_cast<int>(c) ? 1.0 : -1.0;
        const double margin = std::inner_product(x[r].begin(), x[r].end(), w[c].begin(), 0.0) + b[c];
        const double g = yi * margin - 1.0 + diag * alpha[r];
        const double pg = alpha[r] == 0.0 ? std::min(g, 0.0) : g;
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg == 0.0) continue;
        const double old = alpha[r];
        alpha[r] = std::max(0.0, old - g / (sqnorm[r] + diag));
        const double delta = (alpha[r] - old) * yi;
        for (std::size_t i = 0; i < width; ++i) w[c][i] += delta * x[r][i];
        b[c] += delta;
      }
      if (pg_max - pg_min < params.tolerance) break;
    }
  }
  return std::make_shared<LinearClassifier>(std::move(w), std::move(b), ci.labels);
}

}  // namespace mensp
