// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// The four command-line commands. Each takes a resolved config, writes its
// artifacts under cfg.out_dir (always including config.json, the resolved
// config) and returns the text to print.

#ifndef TOPICDIFF_COMMANDS_HPP_
#define TOPICDIFF_COMMANDS_HPP_

#include <filesystem>
#include <string>

#include "json.hpp"
#include "topicdiff/config.hpp"

namespace topicdiff::cli {

/// Writes meta.json and the split files; returns the split statistics table.
std::string cmd_gen_data(const ExperimentConfig& cfg);
/// Trains one variant; writes checkpoint.bin, history.json, report.json, report.csv.
std::string cmd_train(const ExperimentConfig& cfg);
/// Runs the ablation plan; writes ablation.json, ablation.csv, ttest.csv and per-variant reports.
std::string cmd_ablate(const ExperimentConfig& cfg);
/// Runs one diagnostic and writes diag-<name>.json. Throws OracleError when a check fails.
std::string cmd_diag(const ExperimentConfig& cfg, const std::string& name);

/// Loads cfg.dataset or generates the synthetic dataset.
Dataset resolve_dataset(const ExperimentConfig& cfg);
/// Conversations and utterances per split.
std::string split_table(const Dataset& ds);
/// Directory-safe form of a variant id ("full:av" → "full-av").
std::string variant_dir(const std::string& id);
/// Pretty-printed JSON with a trailing newline, written through a temporary file.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace topicdiff::cli

#endif  // TOPICDIFF_COMMANDS_HPP_
