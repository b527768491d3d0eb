// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include "doctest.h"
#include "topicdiff/commands.hpp"
#include "topicdiff/config.hpp"
#include "topicdiff/error.hpp"
#include "topicdiff/log.hpp"

using namespace topicdiff;
using nlohmann::json;

TEST_CASE("empty config materializes every default") {
  const auto cfg = cli::parse_config(json::object());
  CHECK_NOTHROW(cfg.validate());
  const json r = cli::resolved_json(cfg);
  CHECK(r["seed"] == 1);
  CHECK(r["train"]["alpha"] == 0.5);
  CHECK(r["train"]["lr_score"] == 1e-5);
  CHECK(r["train"]["patience"] == 20);
  CHECK(r["model"]["latent_dim"] == 20);
  CHECK(r["diffusion"]["levels"] == 10);
  CHECK(r["data"]["synthetic"]["num_topics"] == 8);
  CHECK(r["ablation"]["variants"].size() == 3);
  CHECK(cli::resolved_json(cli::parse_config(r)) == r);
}

TEST_CASE("file values override defaults, flags override file values") {
  const json j = {{"seed", 7},
                  {"train", {{"max_epochs", 30}, {"tdb_enabled", true}}},
                  {"data", {{"synthetic", {{"num_topics", 4}}}}},
                  {"out_dir", "from_file"}};
  auto cfg = cli::parse_config(j);
  CHECK(cfg.train.max_epochs == 30);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.synth.seed == 7);
  CHECK(cfg.synth.num_topics == 4);
  cli::Overrides flags;
  flags.seed = 11;
  flags.no_tdb = true;
  flags.modalities = "av";
  flags.jobs = 3;
  flags.out_dir = "from_flag";
  cli::apply_overrides(cfg, flags);
  CHECK(cfg.seed == 11);
  CHECK(cfg.train.seed == 11);
  CHECK(cfg.synth.seed == 11);
  CHECK_FALSE(cfg.train.tdb_enabled);
  CHECK(cfg.train.modality_mask == train::ModalityMask{true, true, false});
  CHECK(cfg.ablation.jobs == 3);
  CHECK(cfg.out_dir == "from_flag");
  CHECK(cfg.train.max_epochs == 30);
}

TEST_CASE("bad configs are rejected") {
  CHECK_THROWS_AS(cli::parse_config({{"bogus", 1}}), ParseError);
  CHECK_THROWS_AS(cli::parse_config({{"train", {{"alpah", 1}}}}), ParseError);
  CHECK_THROWS_AS(cli::parse_config({{"data", {{"path", "x"}, {"synthetic", json::object()}}}}), ParseError);
  CHECK_THROWS_AS(cli::parse_config({{"data", {{"synthetic", {{"seed", 3}}}}}}), ParseError);
  CHECK_THROWS_AS(cli::parse_config({{"train", {{"seed", 3}}}}), ParseError);
  CHECK_THROWS_AS(cli::parse_config({{"schema", "v2"}}), ParseError);
  CHECK_THROWS_AS(cli::parse_config({{"train", {{"alpha", "half"}}}}), ParseError);

  auto cfg = cli::parse_config({{"ablation", {{"variants", {"full"}}, {"pairs", json::array({json::array({"full", "baseline"})})}}}});
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = cli::parse_config({{"ablation", {{"variants", {"full", "full"}}, {"pairs", json::array()}}}});
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = cli::parse_config({{"diffusion", {{"levels", 3}}}});
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CHECK_THROWS_AS(cli::load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("ablation plan follows the config") {
  const auto cfg = cli::parse_config(
      {{"ablation", {{"variants", {"baseline", "full:a"}}, {"seeds", {4, 5}}, {"pairs", json::array({json::array({"full:a", "baseline"})})}}}});
  const auto plan = cfg.ablation_plan();
  REQUIRE(plan.variants.size() == 2);
  CHECK(plan.variants[1].mask == train::ModalityMask{true, false, false});
  CHECK(plan.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(cli::variant_dir("full:av") == "full-av");
}

TEST_CASE("log levels") {
  CHECK(log::parse_level("error") == log::Level::kError);
  CHECK(log::parse_level("debug") == log::Level::kDebug);
  CHECK_THROWS_AS(log::parse_level("verbose"), ContractError);
  const auto saved = log::level();
  log::set_level(log::Level::kError);
  CHECK(log::level() == log::Level::kError);
  log::set_level(saved);
}
