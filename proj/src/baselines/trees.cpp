#include <cmath>
#include <functional>
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

struct Tree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    std::vector<double> value;
  };
  std::vector<Node> nodes;

  const std::vector<double>& leaf(std::span<const double> x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].value;
  }
};

/// Greedy CART growth. Classification uses Gini impurity on class indices;
/// regression uses squared error on real targets. Rows may repeat (bootstrap).
class TreeBuilder {
 public:
  using LeafFn = std::function<std::vector<double>(const std::vector<std::size_t>&)>;

  TreeBuilder(const FeatureMatrix& x, const TreeParams& params, std::size_t max_features, Rng* rng)
      : x_(x), params_(params), max_features_(max_features), rng_(rng), width_(x.front().size()) {}

  Tree classify(const std::vector<std::size_t>& rows, const std::vector<int>& y, std::size_t num_classes) {
    y_ = &y;
    k_ = num_classes;
    leaf_ = [&](const std::vector<std::size_t>& idx) {
      std::vector<double> p(k_, 0.0);
      for (auto i : idx) p[static_cast<std::size_t>(y[i])] += 1.0;
      for (auto& v : p) v /= static_cast<double>(idx.size());
      return p;
    };
    return build(rows);
  }

  Tree regress(const std::vector<std::size_t>& rows, const std::vector<double>& target, LeafFn leaf) {
    target_ = &target;
    leaf_ = std::move(leaf);
    return build(rows);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  Tree build(const std::vector<std::size_t>& rows) {
    Tree t;
    grow(t, rows, 0);
    return t;
  }

  int grow(Tree& t, const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    const bool depth_ok = params_.max_depth <= 0 || depth < params_.max_depth;
    const bool size_ok = static_cast<int>(rows.size()) >= params_.min_samples_split;
    Split s;
    if (depth_ok && size_ok && !pure(rows)) s = best_split(rows);
    if (s.feature < 0) {
      t.nodes[static_cast<std::size_t>(id)].value = leaf_(rows);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (auto i : rows) (x_[i][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(i);
    t.nodes[static_cast<std::size_t>(id)].feature = s.feature;
    t.nodes[static_cast<std::size_t>(id)].threshold = s.threshold;
    const int l = grow(t, left, depth + 1);
    const int r = grow(t, right, depth + 1);
    t.nodes[static_cast<std::size_t>(id)].left = l;
    t.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  bool pure(const std::vector<std::size_t>& rows) const {
    for (auto i : rows) {
      if (y_ ? (*y_)[i] != (*y_)[rows.front()] : (*target_)[i] != (*target_)[rows.front()]) return false;
    }
    return true;
  }

  // Sum over children of (sum of squared class counts)/n for Gini, or
  // (sum of targets)^2/n for squared error; larger is better in both cases.
  double parent_score(const std::vector<std::size_t>& rows) const {
    const double n = static_cast<double>(rows.size());
    if (y_) {
      std::vector<double> c(k_, 0.0);
      for (auto i : rows) c[static_cast<std::size_t>((*y_)[i])] += 1.0;
      double s = 0.0;
      for (double v : c) s += v * v;
      return s / n;
    }
    double sum = 0.0;
    for (auto i : rows) sum += (*target_)[i];
    return sum * sum / n;
  }

  Split best_split(const std::vector<std::size_t>& rows) {
    const double base = parent_score(rows);
    Split best;
    best.score = base + 1e-12 * std::max(1.0, std::abs(base));

    std::vector<std::size_t> features(width_);
    std::iota(features.begin(), features.end(), std::size_t{0});
    const std::size_t limit = max_features_ == 0 ? width_ : std::min(max_features_, width_);
    std::size_t visited = 0;

    std::vector<std::pair<double, std::size_t>> column(rows.size());
    for (std::size_t f_pos = 0; f_pos < width_ && visited < limit; ++f_pos) {
      if (rng_) {
        const std::size_t j = f_pos + static_cast<std::size_t>(rng_->uniform_below(width_ - f_pos));
        std::swap(features[f_pos], features[j]);
      }
      const std::size_t f = features[f_pos];
      for (std::size_t r = 0; r < rows.size(); ++r) column[r] = {x_[rows[r]][f], rows[r]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++visited;
      scan(column, f, best);
    }
    return best;
  }

  void scan(const std::vector<std::pair<double, std::size_t>>& column, std::size_t f, Split& best) const {
    const std::size_t n = column.size();
    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if (y_) {
      std::vector<double> left(k_, 0.0), right(k_, 0.0);
      for (const auto& [v, i] : column) right[static_cast<std::size_t>((*y_)[i])] += 1.0;
      double sq_left = 0.0, sq_right = 0.0;
      for (double c : right) sq_right += c * c;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        const auto c = static_cast<std::size_t>((*y_)[column[j].second]);
        sq_left += 2.0 * left[c] + 1.0;
        sq_right -= 2.0 * right[c] - 1.0;
        left[c] += 1.0;
        right[c] -= 1.0;
        consider(column, j, f, sq_left / static_cast<double>(j + 1) + sq_right / static_cast<double>(n - j - 1),
                 min_leaf, best);
      }
    } else {
      double total = 0.0;
      for (const auto& e : column) total += (*target_)[e.second];
      double left = 0.0;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        left += (*target_)[column[j].second];
        const double right = total - left;
        consider(column, j, f,
                 left * left / static_cast<double>(j + 1) + right * right / static_cast<double>(n - j - 1),
                 min_leaf, best);
      }
    }
  }

  static void consider(const std::vector<std::pair<double, std::size_t>>& column, std::size_t j, std::size_t f,
                       double score, std::size_t min_leaf, Split& best) {
    const std::size_t n = column.size();
    if (column[j].first == column[j + 1].first) return;
    if (j + 1 < min_leaf || n - j - 1 < min_leaf) return;
    if (score <= best.score) return;
    double thr = 0.5 * (column[j].first + column[j + 1].first);
    if (!(thr < column[j + 1].first)) thr = column[j].first;
    best = Split{static_cast<int>(f), thr, score};
  }

  const FeatureMatrix& x_;
  TreeParams params_;
  std::size_t max_features_;
  Rng* rng_;
  std::size_t width_;
  const std::vector<int>* y_ = nullptr;
  std::size_t k_ = 0;
  const std::vector<double>* target_ = nullptr;
  LeafFn leaf_;
};

class ForestClassifier final : public Classifier {
 public:
  ForestClassifier(std::vector<Tree> trees, std::vector<int> labels, std::size_t width)
      : trees_(std::move(trees)), labels_(std::move(labels)), width_(width) {}

  int predict(std::span<const double> x) const override {
    check_width(x, width_);
    std::vector<double> p(labels_.size(), 0.0);
    for (const auto& t : trees_) {
      const auto& leaf = t.leaf(x);
      for (std::size_t c = 0; c < p.size(); ++c) p[c] += leaf[c];
    }
    return labels_[argmax_first(p)];
  }

 private:
  std::vector<Tree> trees_;
  std::vector<int> labels_;
  std::size_t width_;
};

class BoostedClassifier final : public Classifier {
 public:
  BoostedClassifier(std::vector<double> init, std::vector<std::vector<Tree>> rounds, double lr,
                    std::vector<int> labels, std::size_t width)
      : init_(std::move(init)), rounds_(std::move(rounds)), lr_(lr), labels_(std::move(labels)), width_(width) {}

  std::vector<double> raw(std::span<const double> x) const {
    std::vector<double> f = init_;
    for (const auto& round : rounds_)
      for (std::size_t c = 0; c < f.size(); ++c) f[c] += lr_ * round[c].leaf(x)[0];
    return f;
  }

  int predict(std::span<const double> x) const override {
    check_width(x, width_);
    return labels_[argmax_first(raw(x))];
  }

 private:
  std::vector<double> init_;
  std::vector<std::vector<Tree>> rounds_;
  double lr_;
  std::vector<int> labels_;
  std::size_t width_;
};

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void check_tree_params(const TreeParams& p) {
  if (p.max_depth < 0) throw ConfigError("tree max_depth must be >= 0");
  if (p.min_samples_split < 2) throw ConfigError("tree min_samples_split must be >= 2");
  if (p.min_samples_leaf < 1) throw ConfigError("tree min_samples_leaf must be >= 1");
}

}  // namespace

ClassifierPtr fit_decision_tree(const FeatureMatrix& x, const std::vector<int>& y, const TreeParams& params,
                                std::uint64_t seed) {
  check_tree_params(params);
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  Rng rng(seed);
  TreeBuilder builder(x, params, 0, &rng);
  std::vector<Tree> trees{builder.classify(all_rows(x.size()), ci.index, ci.count())};
  return std::make_shared<ForestClassifier>(std::move(trees), ci.labels, x.front().size());
}

ClassifierPtr fit_random_forest(const FeatureMatrix& x, const std::vector<int>& y, const ForestParams& params,
                                std::uint64_t seed) {
  check_tree_params(params.tree);
  if (params.n_trees < 1) throw ConfigError("random forest needs at least one tree");
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  const std::size_t width = x.front().size();
  const auto max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(width))));
  Rng rng(seed);
  std::vector<Tree> trees;
  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<std::size_t> rows(x.size());
    for (auto& r : rows) r = static_cast<std::size_t>(rng.uniform_below(x.size()));
    TreeBuilder builder(x, params.tree, max_features, &rng);
    trees.push_back(builder.classify(rows, ci.index, ci.count()));
  }
  return std::make_shared<ForestClassifier>(std::move(trees), ci.labels, width);
}

ClassifierPtr fit_gbdt(const FeatureMatrix& x, const std::vector<int>& y, const GbdtParams& params) {
  check_tree_params(params.tree);
  if (params.n_rounds < 1) throw ConfigError("gbdt needs at least one boosting round");
  if (!(params.learning_rate > 0.0)) throw ConfigError("gbdt learning_rate must be positive");
  const ClassIndex ci = index_classes(x, y);
  if (ci.count() == 1) return std::make_shared<ConstantClassifier>(ci.labels[0]);
  const std::size_t n = x.size(), k = ci.count();
  const double kd = static_cast<double>(k);

  std::vector<double> init(k, 0.0);
  for (int c : ci.index) init[static_cast<std::size_t>(c)] += 1.0;
  for (auto& v : init) v = std::log(v / static_cast<double>(n));

  std::vector<std::vector<double>> f(n, init);
  std::vector<std::vector<Tree>> rounds;
  std::vector<double> residual(n);
  const auto rows = all_rows(n);
  TreeBuilder builder(x, params.tree, 0, nullptr);
  for (int round = 0; round < params.n_rounds; ++round) {
    std::vector<std::vector<double>> prob(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
      const double mx = *std::max_element(f[i].begin(), f[i].end());
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += (prob[i][c] = std::exp(f[i][c] - mx));
      for (auto& p : prob[i]) p /= z;
    }
    std::vector<Tree> trees;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i)
        residual[i] = (ci.index[i] == static_cast<int>(c) ? 1.0 : 0.0) - prob[i][c];
      auto leaf = [&](const std::vector<std::size_t>& idx) {
        double num = 0.0, den = 0.0;
        for (auto i : idx) {
          num += residual[i];
          den += std::abs(residual[i]) * (1.0 - std::abs(residual[i]));
        }
        return std::vector<double>{den < 1e-150 ? 0.0 : (kd - 1.0) / kd * num / den};
      };
      trees.push_back(builder.regress(rows, residual, leaf));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) f[i][c] += params.learning_rate * trees[c].leaf(x[i])[0];
    rounds.push_back(std::move(trees));
  }
  return std::make_shared<BoostedClassifier>(std::move(init), std::move(rounds), params.learning_rate, ci.labels,
                                             x.front().size());
}

}  // namespace mensp
