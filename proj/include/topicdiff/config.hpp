// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration. A JSON file with every section optional:
//
//   {"schema": "v1", "seed": 1, "data": {"synthetic": {...}} | {"path": "dir"},
//    "model": {...}, "diffusion": {...}, "train": {...}, "ablation": {...},
//    "out_dir": "out"}
//
// Precedence is flags > file > defaults. The resolved form materializes every
// default and is echoed into each output directory.

#ifndef TOPICDIFF_CONFIG_HPP_
#define TOPICDIFF_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "topicdiff/data.hpp"
#include "topicdiff/trainer.hpp"

namespace topicdiff::cli {

struct AblationSettings {
  std::vector<std::string> variants{"baseline", "wo_tdb", "full"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::pair<std::string, std::string>> pairs{{"full", "baseline"}, {"full", "wo_tdb"}};
  std::size_t jobs = 1;
};

struct ExperimentConfig {
  std::string schema = "v1";
  /// Master seed: training seed and synthetic-data seed.
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> dataset;  // set: load from disk
  SynthConfig synth;                             // used when no dataset path
  train::ModelConfig model;
  train::DiffusionConfig diffusion;
  train::TrainConfig train;
  AblationSettings ablation;
  std::filesystem::path out_dir = "out";

  /// Throws ContractError on inconsistent settings.
  void validate() const;
  train::AblationPlan ablation_plan() const;
};

/// Flag values; unset members leave the config untouched.
struct Overrides {
  std::optional<std::uint64_t> seed;
  bool no_tdb = false;
  std::optional<std::string> modalities;
  std::optional<std::size_t> jobs;
  std::optional<std::filesystem::path> out_dir;
};

/// Parses a config document. Unknown keys, two data sources or a wrong schema raise ParseError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_overrides(ExperimentConfig& cfg, const Overrides& flags);
/// Fully materialized config.
nlohmann::json resolved_json(const ExperimentConfig& cfg);

}  // namespace topicdiff::cli

#endif  // TOPICDIFF_CONFIG_HPP_
