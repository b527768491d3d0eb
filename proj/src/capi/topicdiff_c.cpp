// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/topicdiff.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <functional>
#include <new>
#include <string>

#include "topicdiff/commands.hpp"
#include "topicdiff/config.hpp"
#include "topicdiff/error.hpp"
#include "topicdiff/log.hpp"

struct td_session {
  std::optional<nlohmann::json> document;  // unset: all defaults
  topicdiff::cli::Overrides overrides;
  std::string error;
  std::string output;
};

namespace {

using topicdiff::cli::ExperimentConfig;

td_status fail(td_session* s, td_status code, const std::string& message) {
  s->error = message;
  return code;
}

// Runs `fn`, translating exceptions into status codes.
td_status guarded(td_session* s, const std::function<void()>& fn) {
  if (s == nullptr) return TD_ERROR_CONFIG;
  try {
    fn();
    s->error.clear();
    return TD_OK;
  } catch (const topicdiff::TrainingError& e) {
    return fail(s, TD_ERROR_TRAINING, e.what());
  } catch (const topicdiff::OracleError& e) {
    return fail(s, TD_ERROR_ORACLE, e.what());
  } catch (const topicdiff::ParseError& e) {
    return fail(s, TD_ERROR_CONFIG, e.what());
  } catch (const topicdiff::SchemaError& e) {
    return fail(s, TD_ERROR_CONFIG, e.what());
  } catch (const topicdiff::IoError& e) {
    return fail(s, TD_ERROR_CONFIG, e.what());
  } catch (const topicdiff::ContractError& e) {
    return fail(s, TD_ERROR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(s, TD_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(s, TD_ERROR, e.what());
  } catch (...) {
    return fail(s, TD_ERROR, "unknown error");
  }
}

ExperimentConfig resolve(const td_session* s) {
  ExperimentConfig cfg = s->document ? topicdiff::cli::parse_config(*s->document) : ExperimentConfig{};
  topicdiff::cli::apply_overrides(cfg, s->overrides);
  cfg.validate();
  return cfg;
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

td_status run_command(td_session* s, const std::function<std::string(const ExperimentConfig&)>& cmd) {
  return guarded(s, [&] { s->output = cmd(resolve(s)); });
}

}  // namespace

extern "C" {

const char* td_version(void) { return "0.1.0"; }

td_status td_session_create(td_session** out) {
  if (out == nullptr) return TD_ERROR_CONFIG;
  *out = new (std::nothrow) td_session();
  return *out ? TD_OK : TD_ERROR;
}

void td_session_destroy(td_session* session) { delete session; }

const char* td_last_error(const td_session* session) { return session ? session->error.c_str() : "null session"; }

const char* td_last_output(const td_session* session) { return session ? session->output.c_str() : ""; }

td_status td_load_config_file(td_session* session, const char* path) {
  return guarded(session, [&] {
    if (path == nullptr) throw topicdiff::ContractError("config path is null");
    const auto cfg = topicdiff::cli::load_config(path);
    session->document = topicdiff::cli::resolved_json(cfg);
  });
}

td_status td_load_config_json(td_session* session, const char* json_text) {
  return guarded(session, [&] {
    if (json_text == nullptr) throw topicdiff::ContractError("config text is null");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw topicdiff::ParseError(std::string("config: ") + e.what());
    }
    topicdiff::cli::parse_config(j);
    session->document = std::move(j);
  });
}

td_status td_set_seed(td_session* session, uint64_t seed) {
  return guarded(session, [&] { session->overrides.seed = seed; });
}

td_status td_set_no_tdb(td_session* session) {
  return guarded(session, [&] { session->overrides.no_tdb = true; });
}

td_status td_set_modalities(td_session* session, const char* subset) {
  return guarded(session, [&] {
    if (subset == nullptr) throw topicdiff::ContractError("modality subset is null");
    topicdiff::train::parse_mask(subset);
    session->overrides.modalities = subset;
  });
}

td_status td_set_jobs(td_session* session, size_t jobs) {
  return guarded(session, [&] {
    if (jobs == 0) throw topicdiff::ContractError("jobs must be >= 1");
    session->overrides.jobs = jobs;
  });
}

td_status td_set_out_dir(td_session* session, const char* dir) {
  return guarded(session, [&] {
    if (dir == nullptr || *dir == '\0') throw topicdiff::ContractError("output directory must not be empty");
    session->overrides.out_dir = dir;
  });
}

td_status td_set_log_level(td_session* session, const char* level) {
  return guarded(session, [&] {
    if (level == nullptr) throw topicdiff::ContractError("log level is null");
    topicdiff::log::set_level(topicdiff::log::parse_level(level));
  });
}

td_status td_resolved_config(td_session* session, char** json_out) {
  return guarded(session, [&] {
    if (json_out == nullptr) throw topicdiff::ContractError("output pointer is null");
    *json_out = copy_string(topicdiff::cli::resolved_json(resolve(session)).dump(2));
  });
}

td_status td_gen_data(td_session* session) { return run_command(session, topicdiff::cli::cmd_gen_data); }

td_status td_train(td_session* session) { return run_command(session, topicdiff::cli::cmd_train); }

td_status td_ablate(td_session* session) { return run_command(session, topicdiff::cli::cmd_ablate); }

td_status td_diag(td_session* session, const char* name) {
  if (session != nullptr && name == nullptr) return fail(session, TD_ERROR_CONFIG, "diagnostic name is null");
  return run_command(session, [&](const ExperimentConfig& cfg) { return topicdiff::cli::cmd_diag(cfg, name); });
}

void td_string_free(char* s) { std::free(s); }

}  // extern "C"
