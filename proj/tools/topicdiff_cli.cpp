// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// topicdiff: command-line front end over the C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "topicdiff/topicdiff.h"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool no_tdb = false;
  std::string modalities;
  std::optional<std::size_t> jobs;
  std::string out;
};

using SessionPtr = std::unique_ptr<td_session, decltype(&td_session_destroy)>;

int report(const td_session* s, td_status st) {
  if (st != TD_OK) std::fprintf(stderr, "topicdiff: %s\n", td_last_error(s));
  return static_cast<int>(st);
}

td_status configure(td_session* s, const Flags& f) {
  td_status st = TD_OK;
  if (const char* level = std::getenv("TOPICDIFF_LOG"); level && *level) {
    if ((st = td_set_log_level(s, level)) != TD_OK) return st;
  }
  if (!f.config.empty() && (st = td_load_config_file(s, f.config.c_str())) != TD_OK) return st;
  if (f.seed && (st = td_set_seed(s, *f.seed)) != TD_OK) return st;
  if (f.no_tdb && (st = td_set_no_tdb(s)) != TD_OK) return st;
  if (!f.modalities.empty() && (st = td_set_modalities(s, f.modalities.c_str())) != TD_OK) return st;
  if (f.jobs && (st = td_set_jobs(s, *f.jobs)) != TD_OK) return st;
  if (!f.out.empty() && (st = td_set_out_dir(s, f.out.c_str())) != TD_OK) return st;
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TopicDiff: topic-enriched diffusion for multimodal conversational emotion detection"};
  app.set_version_flag("--version", td_version());
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "master seed");
  app.add_flag("--no-tdb", f.no_tdb, "disable the diffusion block");
  app.add_option("--modalities", f.modalities, "modalities with topic modules, subset of avl");
  app.add_option("--jobs", f.jobs, "parallel ablation workers")->check(CLI::PositiveNumber);
  app.add_option("--out", f.out, "output directory");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* train = app.add_subcommand("train", "train and evaluate one variant");
  auto* ablate = app.add_subcommand("ablate", "run the ablation study");
  auto* diag = app.add_subcommand("diag", "run a numerical diagnostic");
  std::string diag_name;
  diag->add_option("name", diag_name, "grad-check, sde-demo or dsm-oracle")
      ->required()
      ->check(CLI::IsMember({"grad-check", "sde-demo", "dsm-oracle"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return TD_ERROR_CONFIG;
  }

  td_session* raw = nullptr;
  if (td_session_create(&raw) != TD_OK) {
    std::fprintf(stderr, "topicdiff: cannot allocate session\n");
    return TD_ERROR;
  }
  const SessionPtr session(raw, &td_session_destroy);
  td_session* s = session.get();

  if (const td_status st = configure(s, f); st != TD_OK) return report(s, st);

  td_status st = TD_OK;
  if (gen->parsed())
    st = td_gen_data(s);
  else if (train->parsed())
    st = td_train(s);
  else if (ablate->parsed())
    st = td_ablate(s);
  else
    st = td_diag(s, diag_name.c_str());

  if (st == TD_OK) std::fputs(td_last_output(s), stdout);
  return report(s, st);
}
