// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

#include "topicdiff/error.hpp"

namespace topicdiff::log {

namespace {

Level from_env() {
  const char* env = std::getenv("TOPICDIFF_LOG");
  if (env == nullptr || *env == '\0') return Level::kInfo;
  try {
    return parse_level(env);
  } catch (const ContractError&) {
    return Level::kInfo;
  }
}

std::atomic<int>& threshold() {
  static std::atomic<int> value{static_cast<int>(from_env())};
  return value;
}

std::mutex& sink_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

Level level() { return static_cast<Level>(threshold().load()); }

void set_level(Level level) { threshold().store(static_cast<int>(level)); }

Level parse_level(std::string_view text) {
  if (text == "error") return Level::kError;
  if (text == "info") return Level::kInfo;
  if (text == "debug") return Level::kDebug;
  throw ContractError("log level must be error, info or debug, got '" + std::string(text) + "'");
}

void write(Level at, const std::string& message) {
  if (static_cast<int>(at) > threshold().load()) return;
  static constexpr const char* kTags[] = {"error", "info", "debug"};
  std::lock_guard lock(sink_mutex());
  std::cerr << "[" << kTags[static_cast<int>(at)] << "] " << message << '\n';
}

}  // namespace topicdiff::log
