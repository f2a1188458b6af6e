#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "mensp/corpus.hpp"
#include "mensp/encoder/backend.hpp"

namespace mensp {

struct TrainingPair {
  std::string response_text;
  std::string exemplar_text;
  /// 1 when the response's gold level equals the exemplar's level.
  int label = 0;
};

enum class StrategyKind { random, manual_file };

struct SampleStrategy {
  StrategyKind kind = StrategyKind::random;
  std::optional<std::filesystem::path> manual_path;

  static SampleStrategy random() { return {}; }
  static SampleStrategy manual(std::filesystem::path path) { return {StrategyKind::manual_file, std::move(path)}; }
};

std::string strategy_name(StrategyKind kind);

/// Random: the training side of few_shot_split(pool, k, seed).
/// Manual: the file's records verbatim, which must hold exactly k per level.
std::vector<LabeledResponse> select_samples(const std::vector<LabeledResponse>& pool, int k,
                                            const SampleStrategy& strategy, std::uint64_t seed,
                                            const AssessmentItem& item);

/// Throws DataError naming every level whose count is not k.
void check_samples_per_level(const std::vector<LabeledResponse>& samples, int k, int num_levels);

/// One pair per (sample, level), sample-major.
std::vector<TrainingPair> build_pairs(const std::vector<LabeledResponse>& samples, const ExemplarSet& exemplars);

enum class TrainableScope { head_only, full };

struct FineTuneConfig {
  int epochs = 10;
  double learning_rate = 2e-5;
  int batch_size = 4;
  TrainableScope scope = TrainableScope::head_only;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FineTuneResult {
  std::shared_ptr<const Encoder> backend;
  /// Mean pair loss seen during each epoch.
  std::vector<double> epoch_losses;
};

/// Minimizes the two-class cross-entropy of the NSP head against pair labels
/// with Adam. The input backend is left untouched. Head-only scope updates the
/// pooler and NSP classifier; full scope updates every weight.
///
/// Throws UnsupportedOperation for backends that cannot be trained,
/// DataError for an empty pair list and TrainingDiverged on a non-finite loss.
FineTuneResult finetune(const std::shared_ptr<const Encoder>& backend, const std::vector<TrainingPair>& pairs,
                        const FineTuneConfig& config);

}  // namespace mensp
