#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mensp/baselines/classifiers.hpp"
#include "mensp/corpus.hpp"

namespace mensp {

enum class BaselineKind { random, rfdt, gbdt, vote };

enum class VoteMember { naive_bayes, decision_tree, logistic_regression, mlp, svm };

inline constexpr std::array<VoteMember, 5> kVoteMembers = {VoteMember::naive_bayes, VoteMember::decision_tree,
                                                           VoteMember::logistic_regression, VoteMember::mlp,
                                                           VoteMember::svm};

std::string baseline_name(BaselineKind kind);
std::string vote_member_name(VoteMember member);

struct BaselineParams {
  ForestParams random_forest;
  GbdtParams gbdt;
  TreeParams decision_tree;
  NaiveBayesParams naive_bayes;
  LogisticParams logistic_regression;
  MlpParams mlp;
  SvmParams svm;
};

class BaselineModel {
 public:
  BaselineKind kind() const { return kind_; }
  std::size_t width() const { return width_; }
  /// Vote members in kVoteMembers order; a single entry otherwise.
  const std::vector<ClassifierPtr>& members() const { return members_; }

  static BaselineModel random_kind();
  static BaselineModel from_members(BaselineKind kind, std::vector<ClassifierPtr> members, std::size_t width);

 private:
  BaselineKind kind_ = BaselineKind::random;
  std::size_t width_ = 0;
  std::vector<ClassifierPtr> members_;
};

/// n independent uniform grades in [0, G-1].
std::vector<GradeLevel> random_score(std::uint64_t seed, std::size_t n, int num_levels);

ClassifierPtr fit_vote_member(VoteMember member, const FeatureMatrix& x, const std::vector<int>& y,
                              const BaselineParams& params, std::uint64_t seed);

/// Random yields a model that only random_score can use.
BaselineModel train_baseline(BaselineKind kind, const FeatureMatrix& features, const std::vector<GradeLevel>& labels,
                             std::uint64_t seed, const BaselineParams& params = {});

/// Vote takes the most common member prediction, ties to the lowest grade.
std::vector<GradeLevel> predict_baseline(const BaselineModel& model, const FeatureMatrix& features);

/// Majority over member votes with ties to the lowest label.
int majority_vote(const std::vector<int>& votes);

}  // namespace mensp
