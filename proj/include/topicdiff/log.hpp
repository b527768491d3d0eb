// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TOPICDIFF_LOG_HPP_
#define TOPICDIFF_LOG_HPP_

#include <string>
#include <string_view>

namespace topicdiff::log {

enum class Level { kError = 0, kInfo = 1, kDebug = 2 };

/// Current threshold. Initialized from TOPICDIFF_LOG (error, info, debug); defaults to info.
Level level();
void set_level(Level level);
/// Parses "error", "info" or "debug"; throws ContractError otherwise.
Level parse_level(std::string_view text);

/// Writes one line to stderr if `at` is within the threshold.
void write(Level at, const std::string& message);
inline void error(const std::string& message) { write(Level::kError, message); }
inline void info(const std::string& message) { write(Level::kInfo, message); }
inline void debug(const std::string& message) { write(Level::kDebug, message); }

}  // namespace topicdiff::log

#endif  // TOPICDIFF_LOG_HPP_
