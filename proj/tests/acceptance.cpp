// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Tolerances are fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "topicdiff/commands.hpp"
#include "topicdiff/config.hpp"
#include "topicdiff/eval.hpp"
#include "topicdiff/log.hpp"
#include "topicdiff/mce.hpp"
#include "topicdiff/oracles.hpp"
#include "topicdiff/rng.hpp"
#include "topicdiff/topic_vae.hpp"
#include "topicdiff/trainer.hpp"

namespace fs = std::filesystem;
using namespace topicdiff;
using ad::Tensor;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int n, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  if (!o.pass) ++failures;
  std::cout << "criterion " << std::setw(2) << n << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << title << " |"
            << o.detail.str() << " (" << std::fixed << std::setprecision(1) << seconds_since(t0) << " s)"
            << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Largest raw value among checks whose name starts with prefix.
double largest(const oracles::DiagReport& r, const std::string& prefix) {
  double w = 0;
  for (const auto& c : r.checks)
    if (c.name.rfind(prefix, 0) == 0) w = std::max(w, c.value);
  return w;
}

double mc_kl(const std::vector<double>& mu, const std::vector<double>& log_sigma, std::size_t samples, Rng& rng) {
  // E_q[log q(z) - log p(z)] with p = N(0, I).
  double total = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    double acc = 0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double e = rng.normal();
      const double z = mu[j] + std::exp(log_sigma[j]) * e;
      acc += -log_sigma[j] - 0.5 * e * e + 0.5 * z * z;
    }
    total += acc;
  }
  return total / static_cast<double>(samples);
}

double brute_weighted_f1(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred, std::size_t c) {
  double weighted = 0;
  for (std::size_t k = 0; k < c; ++k) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == k) ++support;
      if (gold[i] == k && pred[i] == k) ++tp;
      if (gold[i] != k && pred[i] == k) ++fp;
      if (gold[i] == k && pred[i] != k) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
    weighted += f * support;
  }
  return 100.0 * weighted / static_cast<double>(gold.size());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> json_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

train::AblationPlan plan_of(const std::vector<std::string>& ids, const std::vector<std::uint64_t>& seeds) {
  train::AblationPlan plan;
  for (const auto& id : ids) plan.variants.push_back(train::parse_variant(id));
  plan.seeds = seeds;
  return plan;
}

}  // namespace

int main() {
  log::set_level(log::Level::kError);
  const cli::ExperimentConfig defaults = cli::parse_config(json::object());
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  criterion(1, "finite-difference gradient suite, max rel err < 1e-4, < 120 s", [](Outcome& o) {
    const auto t0 = Clock::now();
    const auto r = oracles::grad_check_suite(1);
    const double secs = seconds_since(t0);
    double worst = 0;
    for (const auto& c : r.checks) {
      worst = std::max(worst, c.value);
      if (c.value >= 1e-4) o.require(false, c.name + " = " + fmt(c.value));
    }
    o.detail << " checks " << r.checks.size() << ", max rel err " << fmt(worst, 3);
    o.require(secs < 120.0, "runtime " + fmt(secs) + " s");
  });

  criterion(2, "closed-form KL vs 1e6-sample Monte Carlo within 1% on 20 pairs; point checks to 1e-12", [](Outcome& o) {
    o.require(std::abs(vae::kl_loss(Tensor::vector({0, 0, 0}), Tensor::vector({0, 0, 0})).item()) <= 1e-12, "KL(0,0) = 0");
    o.require(std::abs(vae::kl_loss(Tensor::vector({1}), Tensor::vector({0})).item() - 0.5) <= 1e-12, "KL(1,0) = 0.5");
    Rng rng(20);
    double worst = 0;
    for (int pair = 0; pair < 20; ++pair) {
      std::vector<double> mu(3), ls(3);
      for (std::size_t j = 0; j < 3; ++j) {
        mu[j] = rng.uniform(-1.5, 1.5);
        ls[j] = rng.uniform(-1.0, 0.5);
      }
      const double closed = vae::kl_loss(Tensor::vector(mu), Tensor::vector(ls)).item();
      const double mc = mc_kl(mu, ls, 1'000'000, rng);
      const double rel = std::abs(mc - closed) / closed;
      worst = std::max(worst, rel);
      if (rel >= 0.01) o.require(false, "pair " + std::to_string(pair) + " rel err " + fmt(rel));
    }
    o.detail << " max rel err " << fmt(worst, 3);
  });

  criterion(3, "DSM oracle: score MSE < 0.05 at every level; exact kernel score loss < 1e-20", [](Outcome& o) {
    const auto r = oracles::dsm_oracle(1);
    for (const auto& c : r.checks)
      if (!c.pass()) o.require(false, c.name + " = " + fmt(c.value));
    o.detail << " worst level mse " << fmt(largest(r, "score/"), 3) << ", kernel loss " << fmt(largest(r, "kernel_score"), 3);
  });

  criterion(4, "Langevin and reverse-SDE recovery: mean within 0.05, variance within 10%, < 300 s", [](Outcome& o) {
    const auto t0 = Clock::now();
    const auto r = oracles::sde_demo(1);
    const double secs = seconds_since(t0);
    for (const auto& c : r.checks)
      if (!c.pass()) o.require(false, c.name + " = " + fmt(c.value));
    o.detail << " langevin mean err " << fmt(largest(r, "langevin/mean"), 3) << ", var err "
             << fmt(largest(r, "langevin/variance"), 3) << ", reverse-SDE mean err " << fmt(largest(r, "reverse_sde/mean"), 3)
             << ", var err " << fmt(largest(r, "reverse_sde/variance"), 3);
    o.require(secs < 300.0, "runtime " + fmt(secs) + " s");
  });

  criterion(5, "mce_loss analytic cases and total_loss hand arithmetic", [](Outcome& o) {
    const std::vector<std::size_t> labels{2, 0}, sizes{2};
    const Tensor onehot = Tensor::matrix({{0, 0, 1, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0, 0}});
    o.require(mce::mce_loss(onehot, labels, sizes).item() == 0.0, "one-hot -> 0");
    const double uni = mce::mce_loss(Tensor::full({2, 7}, 1.0 / 7), labels, sizes).item();
    o.require(std::abs(uni - std::log(7.0)) <= 1e-12, "uniform -> ln 7");
    const std::array<double, 3> rec{0.2, 0.2, 0.2}, kl{0.1, 0.1, 0.1};
    const double total = train::total_loss(1.0, rec, kl, 0.5, 0.5);
    o.require(std::abs(total - 1.45) <= 1e-15, "total_loss = 1.45");
    o.detail << " uniform " << fmt(uni, 15) << ", total " << fmt(total, 15);
  });

  criterion(6, "weighted F1 vs brute force within 1e-12 on 1000 vectors; hand example 66.67", [](Outcome& o) {
    const std::vector<std::size_t> g{0, 0, 1}, p{0, 1, 1};
    const double hand = eval::weighted_f1(g, p, 2).weighted_f1;
    o.require(std::abs(hand - 200.0 / 3.0) < 1e-9, "hand example " + fmt(hand));
    Rng rng(6);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = static_cast<std::size_t>(rng.integer(1, 60)), c = static_cast<std::size_t>(rng.integer(2, 7));
      std::vector<std::size_t> gold(n), pred(n);
      for (std::size_t i = 0; i < n; ++i) {
        gold[i] = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(c) - 1));
        pred[i] = rng.bernoulli(0.5) ? gold[i] : static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(c) - 1));
      }
      worst = std::max(worst, std::abs(eval::weighted_f1(gold, pred, c).weighted_f1 - brute_weighted_f1(gold, pred, c)));
    }
    o.require(worst <= 1e-12, "max abs diff " + fmt(worst));
    o.detail << " hand " << fmt(hand) << ", max abs diff " << fmt(worst, 3);
  });

  const Dataset data = generate_synthetic(defaults.synth);
  train::AblationReport main_report;

  criterion(7, "5-seed ordering baseline < w/o TDB < full, margins +2.0 / +0.5, p < 0.05, < 1200 s", [&](Outcome& o) {
    const auto t0 = Clock::now();
    main_report = train::run_ablation(data, defaults.model, defaults.diffusion, defaults.train,
                                      plan_of({"baseline", "wo_tdb", "full"}, seeds));
    const double secs = seconds_since(t0);
    const double b = main_report.mean_score("baseline"), w = main_report.mean_score("wo_tdb"),
                 f = main_report.mean_score("full");
    const auto full_scores = main_report.scores("full"), base_scores = main_report.scores("baseline");
    const auto tt = eval::paired_t_test(full_scores, base_scores);
    o.detail << " baseline " << fmt(b) << ", w/o TDB " << fmt(w) << ", full " << fmt(f) << ", p " << fmt(tt.p, 3)
             << ", runtime " << fmt(secs) << " s";
    o.require(b < w, "baseline < w/o TDB");
    o.require(w < f, "w/o TDB < full");
    o.require(f >= b + 2.0, "full >= baseline + 2.0");
    o.require(f >= w + 0.5, "full >= w/o TDB + 0.5");
    o.require(tt.p < 0.05, "p < 0.05");
    o.require(secs < 1200.0, "runtime < 1200 s");
  });

  criterion(8, "all three modalities >= best single modality (5-seed means)", [&](Outcome& o) {
    const auto single = train::run_ablation(data, defaults.model, defaults.diffusion, defaults.train,
                                            plan_of({"full:a", "full:v", "full:l"}, seeds));
    const double all = main_report.rows.empty()
                           ? train::run_ablation(data, defaults.model, defaults.diffusion, defaults.train,
                                                 plan_of({"full"}, seeds))
                                 .mean_score("full")
                           : main_report.mean_score("full");
    double best = -1;
    for (const char* id : {"full:a", "full:v", "full:l"}) {
      const double m = single.mean_score(id);
      best = std::max(best, m);
      o.detail << ' ' << id << ' ' << fmt(m) << ',';
    }
    o.detail << " avl " << fmt(all);
    o.require(all >= best, "avl >= best single");
  });

  criterion(9, "density sweep G in {4, 8, 16}: W-F1 drop smaller for full than baseline", [&](Outcome& o) {
    const auto sets = density_sweep(defaults.synth, {4, 8, 16});
    std::map<std::string, std::vector<double>> means;
    for (const auto& ds : sets) {
      const auto r = train::run_ablation(ds, defaults.model, defaults.diffusion, defaults.train,
                                         plan_of({"baseline", "full"}, seeds));
      for (const char* id : {"baseline", "full"}) means[id].push_back(r.mean_score(id));
    }
    const double drop_base = means["baseline"].front() - means["baseline"].back();
    const double drop_full = means["full"].front() - means["full"].back();
    for (const char* id : {"baseline", "full"})
      o.detail << ' ' << id << ' ' << fmt(means[id][0]) << '/' << fmt(means[id][1]) << '/' << fmt(means[id][2]) << ',';
    o.detail << " drop baseline " << fmt(drop_base) << ", full " << fmt(drop_full);
    o.require(drop_full < drop_base, "full drop < baseline drop");
  });

  criterion(10, "identical config and seed give byte-identical JSON for every command", [](Outcome& o) {
    const fs::path root = fs::temp_directory_path() / "topicdiff_acceptance_determinism";
    fs::remove_all(root);
    const json small = {
        {"data", {{"synthetic", {{"train_conversations", 24}, {"val_conversations", 6}, {"test_conversations", 6}}}}},
        {"train", {{"max_epochs", 3}, {"patience", 3}}},
        {"ablation", {{"variants", {"baseline", "full"}}, {"seeds", {1, 2}}, {"pairs", json::array({json::array({"full", "baseline"})})}}}};
    std::size_t compared = 0;
    for (const std::string cmd : {"gen-data", "train", "ablate", "diag"}) {
      std::array<std::map<std::string, std::string>, 2> files;
      for (int run = 0; run < 2; ++run) {
        auto cfg = cli::parse_config(small);
        cfg.out_dir = root / cmd / std::to_string(run);
        if (cmd == "gen-data") cli::cmd_gen_data(cfg);
        if (cmd == "train") cli::cmd_train(cfg);
        if (cmd == "ablate") cli::cmd_ablate(cfg);
        if (cmd == "diag") cli::cmd_diag(cfg, "sde-demo");
        files[run] = json_files(cfg.out_dir);
      }
      o.require(!files[0].empty(), cmd + " wrote no JSON");
      o.require(files[0] == files[1], cmd + " outputs differ");
      compared += files[0].size();
    }
    o.detail << " compared " << compared << " JSON files";
    fs::remove_all(root);
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
