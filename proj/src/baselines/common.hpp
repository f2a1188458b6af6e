#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mensp/baselines/classifiers.hpp"
#include "mensp/errors.hpp"

namespace mensp::detail {

/// Distinct labels in ascending order plus each row's index into them.
struct ClassIndex {
  std::vector<int> labels;
  std::vector<int> index;

  std::size_t count() const { return labels.size(); }
};

inline ClassIndex index_classes(const FeatureMatrix& x, const std::vector<int>& y) {
  if (x.size() != y.size()) throw DataError("feature rows and labels differ in count");
  if (y.empty()) throw DataError("cannot fit a classifier on zero rows");
  const std::size_t width = x.front().size();
  for (const auto& row : x)
    if (row.size() != width) throw DataError("feature rows have inconsistent widths");
  ClassIndex ci;
  ci.labels = y;
  std::sort(ci.labels.begin(), ci.labels.end());
  ci.labels.erase(std::unique(ci.labels.begin(), ci.labels.end()), ci.labels.end());
  for (int label : y)
    ci.index.push_back(static_cast<int>(std::lower_bound(ci.labels.begin(), ci.labels.end(), label) -
                                        ci.labels.begin()));
  return ci;
}

/// First maximum, so ties go to the lowest class index.
template <typename V>
std::size_t argmax_first(const V& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

class ConstantClassifier final : public Classifier {
 public:
  explicit ConstantClassifier(int label) : label_(label) {}
  int predict(std::span<const double>) const override { return label_; }

 private:
  int label_;
};

inline void check_width(std::span<const double> x, std::size_t width) {
  if (x.size() != width)
    throw DataError("feature width " + std::to_string(x.size()) + " does not match the trained width " +
                    std::to_string(width));
}

}  // namespace mensp::detail
