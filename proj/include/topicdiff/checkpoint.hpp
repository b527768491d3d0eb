// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter checkpoints. Binary, little-endian:
//
//   magic    8 bytes  "TDCKPT\0\0"
//   version  u32      kCheckpointVersion
//   count    u32
//   count × { u32 name_len, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)] }

#ifndef TOPICDIFF_CHECKPOINT_HPP_
#define TOPICDIFF_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "topicdiff/nn.hpp"

namespace topicdiff::nn {

inline constexpr unsigned kCheckpointVersion = 1;

struct StoredTensor {
  ad::Shape shape;
  std::vector<double> values;
  bool operator==(const StoredTensor&) const = default;
};

using Checkpoint = std::map<std::string, StoredTensor>;

void save_checkpoint(const ParamList& params, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies stored values into `params`. Every parameter must be present with a matching shape.
void apply_checkpoint(const Checkpoint& ckpt, ParamList& params);

}  // namespace topicdiff::nn

#endif  // TOPICDIFF_CHECKPOINT_HPP_
