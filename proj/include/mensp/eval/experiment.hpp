#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mensp/baselines/baseline.hpp"
#include "mensp/encoder/backend.hpp"
#include "mensp/fewshot.hpp"

namespace mensp {

enum class ModelKind { random, rfdt, gbdt, vote, mensp };

std::string model_name(ModelKind kind);
ModelKind parse_model_name(const std::string& name);

struct ItemFiles {
  std::filesystem::path responses;
  std::filesystem::path exemplars;
  /// Manual sample file per shot count.
  std::map<int, std::filesystem::path> manual_samples;
};

enum class F1Kind { weighted, macro };

struct ExperimentConfig {
  std::vector<ItemFiles> items;
  std::vector<ModelKind> models = {ModelKind::random, ModelKind::rfdt, ModelKind::gbdt, ModelKind::vote,
                                   ModelKind::mensp};
  std::vector<int> shots = {0, 1, 3};
  std::vector<StrategyKind> strategies = {StrategyKind::random};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  BackendConfig backend;
  FineTuneConfig finetune;
  BaselineParams baselines;
  bool include_zero_in_matching = true;
  F1Kind f1 = F1Kind::weighted;

  /// Throws ConfigError; also when no model/shot/strategy combination is valid.
  void validate() const;
};

/// A row of the results grid. Shot-0 cells carry no strategy.
struct CellKey {
  int shot = 0;
  std::optional<StrategyKind> strategy;
  ModelKind model = ModelKind::mensp;

  auto operator<=>(const CellKey&) const = default;
};

/// Cells valid for the configuration, in report order: by shot, then strategy,
/// then model (Random, RFDT, GBDT, Vote, MeNSP).
std::vector<CellKey> experiment_cells(const ExperimentConfig& config);

struct CellStats {
  std::vector<double> kappas;
  std::vector<double> f1s;
  double kappa_mean = 0.0, kappa_std = 0.0, f1_mean = 0.0, f1_std = 0.0;
  /// Set when any seed failed; the statistics are then not meaningful.
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

struct MetricReport {
  std::vector<std::string> items;
  std::vector<CellKey> rows;
  /// results[item][row index]
  std::map<std::string, std::vector<CellStats>> results;
  std::string config_digest;
  std::string backend_identifier;
  std::vector<std::uint64_t> seeds;
  F1Kind f1 = F1Kind::weighted;
  /// Wall-clock start time; not part of the rendered tables.
  std::string timestamp;

  std::size_t failed_cells() const;
  std::size_t total_cells() const;
};

/// Runs every seed and cell. Per-cell failures are recorded in the report.
/// `backend` overrides config.backend when given.
MetricReport run_experiment(const ExperimentConfig& config, std::shared_ptr<const Encoder> backend = nullptr);

}  // namespace mensp
