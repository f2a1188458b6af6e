#include "mensp/baselines/baseline.hpp"

#include <map>

#include "mensp/errors.hpp"
#include "mensp/util.hpp"

namespace mensp {

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::random: return "Random";
    case BaselineKind::rfdt: return "RFDT";
    case BaselineKind::gbdt: return "GBDT";
    case BaselineKind::vote: return "Vote";
  }
  return "?";
}

std::string vote_member_name(VoteMember member) {
  switch (member) {
    case VoteMember::naive_bayes: return "naive-bayes";
    case VoteMember::decision_tree: return "decision-tree";
    case VoteMember::logistic_regression: return "logistic-regression";
    case VoteMember::mlp: return "multilayer-perceptron";
    case VoteMember::svm: return "support-vector-machine";
  }
  return "?";
}

BaselineModel BaselineModel::random_kind() { return BaselineModel{}; }

BaselineModel BaselineModel::from_members(BaselineKind kind, std::vector<ClassifierPtr> members, std::size_t width) {
  BaselineModel m;
  m.kind_ = kind;
  m.members_ = std::move(members);
  m.width_ = width;
  return m;
}

std::vector<GradeLevel> random_score(std::uint64_t seed, std::size_t n, int num_levels) {
  if (num_levels < 2) throw ConfigError("random scoring needs at least two levels");
  Rng rng(seed);
  std::vector<GradeLevel> out(n);
  for (auto& g : out) g.value = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(num_levels)));
  return out;
}

ClassifierPtr fit_vote_member(VoteMember member, const FeatureMatrix& x, const std::vector<int>& y,
                              const BaselineParams& params, std::uint64_t seed) {
  switch (member) {
    case VoteMember::naive_bayes: return fit_naive_bayes(x, y, params.naive_bayes);
    case VoteMember::decision_tree: return fit_decision_tree(x, y, params.decision_tree, seed);
    case VoteMember::logistic_regression: return fit_logistic_regression(x, y, params.logistic_regression);
    case VoteMember::mlp: return fit_mlp(x, y, params.mlp, seed);
    case VoteMember::svm: return fit_linear_svm(x, y, params.svm, seed);
  }
  throw ConfigError("unknown vote member");
}

BaselineModel train_baseline(BaselineKind kind, const FeatureMatrix& features, const std::vector<GradeLevel>& labels,
                             std::uint64_t seed, const BaselineParams& params) {
  if (kind == BaselineKind::random) return BaselineModel::random_kind();
  if (features.empty() || features.size() != labels.size())
    throw DataError("baseline training needs one label per feature row and at least one row");
  std::vector<int> y;
  for (const auto& g : labels) y.push_back(g.value);
  const std::size_t width = features.front().size();
  std::vector<ClassifierPtr> members;
  if (kind == BaselineKind::rfdt) {
    members.push_back(fit_random_forest(features, y, params.random_forest, seed));
  } else if (kind == BaselineKind::gbdt) {
    members.push_back(fit_gbdt(features, y, params.gbdt));
  } else {
    for (auto m : kVoteMembers) members.push_back(fit_vote_member(m, features, y, params, seed));
  }
  return BaselineModel::from_members(kind, std::move(members), width);
}

int majority_vote(const std::vector<int>& votes) {
  if (votes.empty()) throw DataError("majority vote over no votes");
  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

std::vector<GradeLevel> predict_baseline(const BaselineModel& model, const FeatureMatrix& features) {
  if (model.kind() == BaselineKind::random)
    throw ConfigError("the Random baseline does not predict from features; use random_score");
  std::vector<GradeLevel> out;
  out.reserve(features.size());
  std::vector<int> votes;
  for (const auto& row : features) {
    if (row.size() != model.width())
      throw DataError("feature width " + std::to_string(row.size()) + " does not match the trained width " +
                      std::to_string(model.width()));
    votes.clear();
    for (const auto& m : model.members()) votes.push_back(m->predict(row));
    out.push_back(GradeLevel{majority_vote(votes)});
  }
  return out;
}

}  // namespace mensp
