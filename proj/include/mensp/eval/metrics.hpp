#pragma once

#include <vector>

#include "mensp/corpus.hpp"

namespace mensp {

/// counts[i][j] = responses with human grade i and machine grade j.
struct ConfusionCounts {
  std::vector<std::vector<long>> counts;

  /// G defaults to one more than the largest grade seen.
  static ConfusionCounts from(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine,
                              int num_levels = 0);
  int num_levels() const { return static_cast<int>(counts.size()); }
  long total() const;
};

/// (p_o - p_e) / (1 - p_e); 1.0 when p_e = 1.
double cohens_kappa(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine);

/// Support-weighted mean of per-class F1 over the classes humans used.
double f1_weighted(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine);

/// Unweighted mean of per-class F1 over classes used by either rater.
double f1_macro(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine);

}  // namespace mensp
