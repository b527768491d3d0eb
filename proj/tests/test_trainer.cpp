// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "topicdiff/error.hpp"
#include "topicdiff/trainer.hpp"

using namespace topicdiff;
using ad::Tensor;

namespace {

Dataset small_dataset(std::size_t train = 50, std::uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.train_conversations = train;
  cfg.val_conversations = 10;
  cfg.test_conversations = 10;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

train::TrainConfig quick(std::size_t epochs) {
  train::TrainConfig c;
  c.max_epochs = epochs;
  c.patience = std::min<std::size_t>(epochs, 20);
  c.lr_vae = 1e-3;
  c.lr_score = 1e-4;
  return c;
}

bool all_zero(const nn::ParamList& params) {
  for (const auto& [name, t] : params)
    if (t.has_grad())
      for (double g : t.grad())
        if (g != 0.0) return false;
  return true;
}

bool any_nonzero(const nn::ParamList& params) { return !all_zero(params); }

}  // namespace

TEST_CASE("total loss arithmetic") {
  const std::array<double, 3> rec{0.2, 0.2, 0.2}, kl{0.1, 0.1, 0.1};
  CHECK(train::total_loss(1.0, rec, kl, 0.5, 0.5) == doctest::Approx(1.45).epsilon(1e-15));
  CHECK(train::total_loss(0.8, rec, kl, 0.0, 0.0) == 0.8);
  CHECK(train::total_loss(1.0, rec, kl, 0.5, 0.5, {true, false, false}) == doctest::Approx(1.15).epsilon(1e-15));

  const std::vector<Tensor> rt{Tensor::scalar(0.2), Tensor::scalar(0.2), Tensor::scalar(0.2)};
  const std::vector<Tensor> kt{Tensor::scalar(0.1), Tensor::scalar(0.1), Tensor::scalar(0.1)};
  CHECK(train::total_loss(Tensor::scalar(1.0), rt, kt, 0.5, 0.5).item() == doctest::Approx(1.45).epsilon(1e-15));
}

TEST_CASE("config validation") {
  train::TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.patience = 300;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.modality_mask = {false, false, false};
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("variant ids and names") {
  CHECK(train::parse_variant("baseline").name == "Baseline");
  CHECK(train::parse_variant("wo_tdb").name == "TopicDiff w/o TDB");
  CHECK(train::parse_variant("full").name == "TopicDiff");
  const auto av = train::parse_variant("full:av");
  CHECK(av.mask == train::ModalityMask{true, true, false});
  CHECK(av.id == "full:av");
  CHECK_THROWS_AS(train::parse_variant("baseline:a"), ContractError);
  CHECK_THROWS_AS(train::parse_variant("nonsense"), ContractError);
  CHECK_THROWS_AS(train::parse_mask("axl"), ContractError);
  CHECK_THROWS_AS(train::parse_mask(""), ContractError);
  train::TrainConfig c;
  c.tdb_enabled = false;
  CHECK(train::variant_of(c).id == "wo_tdb");
}

TEST_CASE("parameter partition between L_total and DSM") {
  const Dataset ds = small_dataset(8);
  const train::TrainConfig cfg;
  const train::TopicDiffModel model({}, {}, cfg, ds.meta.dims, ds.meta.num_classes);
  const mce::ConversationBatch batch{std::span<const Conversation>(ds.train)};
  train::TopicDiffModel::Streams streams{Rng(1), Rng(2), Rng(3)};
  const auto main = model.main_params();
  const auto score = model.score_params();
  REQUIRE_FALSE(score.empty());

  const auto out = model.forward(batch, true, streams);
  out.l_total.backward();
  CHECK(any_nonzero(main));
  CHECK(all_zero(score));
  for (auto [n, t] : main) t.zero_grad();

  Rng dsm_rng(4);
  for (std::size_t m = 0; m < kNumModalities; ++m)
    tdb::dsm_loss(model.score(m), out.z_hat[m], model.schedule(), dsm_rng).backward();
  CHECK(all_zero(main));
  CHECK(any_nonzero(score));
}

TEST_CASE("variants build the modules they need") {
  const Dataset ds = small_dataset(4);
  train::TrainConfig c;
  train::parse_variant("baseline").apply(c);
  const train::TopicDiffModel base({}, {}, c, ds.meta.dims, ds.meta.num_classes);
  CHECK(base.score_params().empty());
  for (std::size_t m = 0; m < 3; ++m) CHECK_FALSE(base.has_topic(m));

  c = {};
  train::parse_variant("wo_tdb").apply(c);
  const train::TopicDiffModel wo({}, {}, c, ds.meta.dims, ds.meta.num_classes);
  CHECK(wo.score_params().empty());
  CHECK(wo.has_topic(2));

  c = {};
  train::parse_variant("full:l").apply(c);
  const train::TopicDiffModel l({}, {}, c, ds.meta.dims, ds.meta.num_classes);
  CHECK_FALSE(l.has_topic(0));
  CHECK(l.has_topic(2));
}

TEST_CASE("training lowers train L_mce, restores the best epoch, and is deterministic") {
  const Dataset ds = small_dataset();
  const auto cfg = quick(6);
  const auto a = train::train_joint(ds, {}, {}, cfg);
  const auto& h = a.history;
  REQUIRE_FALSE(h.epochs.empty());
  CHECK(h.epochs.size() <= cfg.max_epochs);
  CHECK(h.epochs.back().train.mce < h.initial_train.mce);
  CHECK(h.best_epoch <= h.epochs.back().epoch);
  for (const auto& e : h.epochs) CHECK(h.epochs[h.best_epoch].val_total <= e.val_total);
  CHECK(train::evaluate_loss(a.model, ds.val).total == doctest::Approx(h.epochs[h.best_epoch].val_total).epsilon(1e-12));

  const auto b = train::train_joint(ds, {}, {}, cfg);
  CHECK(b.history == h);
  CHECK(train::predict(a.model, ds.test) == train::predict(b.model, ds.test));
}

TEST_CASE("patience stops training") {
  const Dataset ds = small_dataset(16);
  auto cfg = quick(30);
  cfg.patience = 1;
  cfg.lr_vae = 0.0;  // validation loss never improves after the first epoch
  cfg.lr_score = 0.0;
  const auto r = train::train_joint(ds, {}, {}, cfg);
  CHECK(r.history.stop_reason == "patience");
  CHECK(r.history.epochs.size() == 2);
  CHECK(r.history.best_epoch == 0);
}

TEST_CASE("the w/o-TDB path ignores every diffusion setting") {
  const Dataset ds = small_dataset(16);
  auto cfg = quick(2);
  cfg.tdb_enabled = false;
  train::DiffusionConfig other;
  other.levels = 4;
  other.sigma_max = 3.0;
  other.langevin.steps_per_level = 9;
  other.langevin.start_level = 1;
  const auto a = train::train_joint(ds, {}, {}, cfg);
  const auto b = train::train_joint(ds, {}, other, cfg);
  CHECK(a.history == b.history);
}

TEST_CASE("language-only, unweighted topic losses still give a working classifier") {
  const Dataset ds = small_dataset();
  auto cfg = quick(4);
  cfg.modality_mask = {false, false, true};
  cfg.alpha = cfg.beta = 0.0;
  const auto r = train::train_joint(ds, {}, {}, cfg);
  CHECK(r.history.epochs.back().train.mce < r.history.initial_train.mce);
  const auto first = r.history.epochs.front().train;
  CHECK(first.total == doctest::Approx(first.mce).epsilon(1e-12));
  const auto preds = train::predict(r.model, ds.test);
  CHECK(preds.size() == count(ds.test).utterances);
  for (auto p : preds) CHECK(p < ds.meta.num_classes);
}

TEST_CASE("ablation report layout") {
  const Dataset ds = small_dataset(16);
  train::AblationPlan plan;
  plan.variants = {train::parse_variant("baseline"), train::parse_variant("full")};
  plan.seeds = {1, 2};
  plan.pairs = {{"full", "baseline"}};
  plan.jobs = 2;
  const auto rep = train::run_ablation(ds, {}, {}, quick(2), plan);
  CHECK(rep.rows.size() == 4);
  CHECK(rep.tests.size() == 1);
  CHECK(rep.dataset_hash == ds.content_hash());
  CHECK(rep.scores("full").size() == 2);
  CHECK(rep.rows[0].variant == "Baseline");
  CHECK(rep.rows[3].seed == 2);

  plan.jobs = 1;
  const auto serial = train::run_ablation(ds, {}, {}, quick(2), plan);
  CHECK(nlohmann::json(serial).dump() == nlohmann::json(rep).dump());
}
