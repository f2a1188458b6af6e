#pragma once

// Classical classifiers over dense feature rows. Labels are small
// non-negative integers; every model only ever predicts labels it saw in
// training, and single-label training data yields a constant predictor.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mensp/baselines/tfidf.hpp"

namespace mensp {

struct TreeParams {
  /// 0 = grow until pure.
  int max_depth = 0;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
};

struct ForestParams {
  int n_trees = 100;
  TreeParams tree;
};

struct GbdtParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  TreeParams tree{3, 2, 1};
};

struct NaiveBayesParams {
  double alpha = 1.0;
};

struct LogisticParams {
  int iterations = 500;
  double learning_rate = 1.0;
  double l2 = 1e-3;
};

struct MlpParams {
  int hidden_units = 64;
  int epochs = 200;
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  int batch_size = 32;
};

struct SvmParams {
  double c = 1.0;
  int max_iterations = 1000;
  double tolerance = 0.1;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int predict(std::span<const double> x) const = 0;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

ClassifierPtr fit_decision_tree(const FeatureMatrix& x, const std::vector<int>& y, const TreeParams& params,
                                std::uint64_t seed);
/// Bootstrap samples, sqrt(features) candidates per split, averaged class probabilities.
ClassifierPtr fit_random_forest(const FeatureMatrix& x, const std::vector<int>& y, const ForestParams& params,
                                std::uint64_t seed);
/// Softmax boosting with one regression tree per class per round and Newton leaf values.
ClassifierPtr fit_gbdt(const FeatureMatrix& x, const std::vector<int>& y, const GbdtParams& params);
/// Multinomial naive Bayes with additive smoothing.
ClassifierPtr fit_naive_bayes(const FeatureMatrix& x, const std::vector<int>& y, const NaiveBayesParams& params);
/// Multinomial logistic regression, full-batch gradient descent with an L2 penalty.
ClassifierPtr fit_logistic_regression(const FeatureMatrix& x, const std::vector<int>& y,
                                      const LogisticParams& params);
/// One ReLU hidden layer, softmax output, Adam on shuffled minibatches.
ClassifierPtr fit_mlp(const FeatureMatrix& x, const std::vector<int>& y, const MlpParams& params,
                      std::uint64_t seed);
/// One-vs-rest linear SVM (squared hinge, L2), dual coordinate descent.
ClassifierPtr fit_linear_svm(const FeatureMatrix& x, const std::vector<int>& y, const SvmParams& params,
                             std::uint64_t seed);

}  // namespace mensp
