// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conversation datasets: in-memory types, the on-disk JSONL schema, and a
// synthetic generator with planted conversation topics.
//
// On disk a dataset is a directory holding meta.json plus train.jsonl,
// val.jsonl and test.jsonl. Each JSONL line is one conversation:
//
//   {"id": "...", "topic": 3, "utterances": [
//      {"speaker": "A", "label": 2, "a": [...], "v": [...], "l": [...]}, ...]}
//
// "topic" is optional (present for synthetic data).

#ifndef TOPICDIFF_DATA_HPP_
#define TOPICDIFF_DATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace topicdiff {

inline constexpr const char* kSchemaVersion = "v1";

enum class Modality : std::size_t { kAcoustic = 0, kVision = 1, kLanguage = 2 };
inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<char, kNumModalities> kModalityKeys = {'a', 'v', 'l'};

struct Utterance {
  std::array<std::vector<double>, kNumModalities> features;  // a, v, l
  std::string speaker;
  std::size_t label = 0;

  const std::vector<double>& a() const { return features[0]; }
  const std::vector<double>& v() const { return features[1]; }
  const std::vector<double>& l() const { return features[2]; }
  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::optional<std::size_t> topic;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool operator==(const Conversation&) const = default;
};

struct SplitSizes {
  std::size_t conversations = 0;
  std::size_t utterances = 0;
  bool operator==(const SplitSizes&) const = default;
};

struct DatasetMeta {
  std::string schema = kSchemaVersion;
  std::array<std::size_t, kNumModalities> dims{};
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  SplitSizes train, val, test;
  std::string generator_hash;  // empty unless synthetic
  nlohmann::json generator;    // resolved SynthConfig, null unless synthetic
  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Conversation> train, val, test;

  /// FNV-1a over the canonical serialization of all splits, as 16 hex digits.
  std::string content_hash() const;
  bool operator==(const Dataset&) const = default;
};

struct SynthConfig {
  std::size_t num_topics = 8;
  double topic_separation = 0.8;      // norm of each topic mean
  double snr_a = 0.9, snr_v = 0.9, snr_l = 0.6;
  double prior_concentration = 2.5;   // spread of topic-conditioned emotion logits
  std::size_t train_conversations = 200;
  std::size_t val_conversations = 50;
  std::size_t test_conversations = 100;
  std::size_t min_utterances = 6;
  std::size_t max_utterances = 12;
  /// When non-zero, the train split is filled to exactly this many utterances
  /// (train_conversations is then ignored).
  std::size_t train_utterances = 0;
  std::size_t num_classes = 7;
  std::array<std::size_t, kNumModalities> dims{16, 16, 24};
  std::uint64_t seed = 1;

  void validate() const;
  double snr(std::size_t modality) const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SynthConfig& c);

std::vector<std::string> default_class_names(std::size_t num_classes);

Dataset generate_synthetic(const SynthConfig& cfg);

/// One dataset per topic count, each with the same total train utterances
/// (cfg.train_utterances, or the expected count under cfg when zero).
std::vector<Dataset> density_sweep(const SynthConfig& cfg, const std::vector<std::size_t>& topic_counts);

nlohmann::json conversation_to_json(const Conversation& c);
Conversation conversation_from_json(const nlohmann::json& j);

/// Writes meta.json and the three split files into `dir` (created if missing).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
/// Reads and validates a dataset directory. Nothing is returned unless every file validates.
Dataset load_dataset(const std::filesystem::path& dir);
/// Parses one JSONL split. Errors carry 1-based line numbers.
std::vector<Conversation> read_split(std::istream& in, const std::string& name);
/// Schema checks: dims, labels, non-empty conversations.
void validate_dataset(const Dataset& ds);

SplitSizes count(const std::vector<Conversation>& split);

}  // namespace topicdiff

#endif  // TOPICDIFF_DATA_HPP_
