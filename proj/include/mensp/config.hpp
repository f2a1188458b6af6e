#pragma once

// The JSON configuration document shared by all commands. Blocks:
// backend, scoring, finetune, baselines, experiment, paths. Every block is
// optional; unknown keys are rejected with their dotted path. Relative paths
// resolve against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mensp/baselines/baseline.hpp"
#include "mensp/encoder/backend.hpp"
#include "mensp/eval/experiment.hpp"
#include "mensp/fewshot.hpp"
#include "mensp/scorer.hpp"

namespace mensp {

struct PathsBlock {
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> exemplars;
  std::optional<std::filesystem::path> responses;
  std::optional<std::filesystem::path> samples;
};

struct GlobalConfig {
  BackendConfig backend;
  ScorerOptions scoring;
  FineTuneConfig finetune;
  BaselineParams baselines;
  /// Items, models, shots, strategies, seeds and the F1 variant.
  ExperimentConfig experiment;
  PathsBlock paths;
  /// FNV-1a of the canonical document after overrides.
  std::string digest;

  /// The experiment block combined with the backend, scoring, finetune and baseline blocks.
  ExperimentConfig experiment_config() const;
};

/// Command-line values that take precedence over the document.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<bool> include_zero_in_matching;
};

GlobalConfig parse_global_config(const std::string& text, const std::filesystem::path& base_dir,
                                 const ConfigOverrides& overrides = {}, const std::string& source = "<config>");

GlobalConfig load_global_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Defaults with a Jaccard / token-hash mock backend.
GlobalConfig default_global_config(const ConfigOverrides& overrides = {});

}  // namespace mensp
