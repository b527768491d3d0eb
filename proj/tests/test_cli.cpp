// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(TOPICDIFF_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

const char* kSmoke = R"({
  "data": {"synthetic": {"train_conversations": 50, "val_conversations": 10, "test_conversations": 10}},
  "train": {"max_epochs": 2, "patience": 2}
})";

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("diag nonsense").code == 2);
  CHECK(run("train --jobs 0").code == 2);
  CHECK(run("train --config /nonexistent.json").code == 2);
  Workspace ws("topicdiff_cli_usage");
  CHECK(run("train --config " + ws.write("bad.json", "{\"train\": {\"alpha\": -1}}").string()).code == 2);
  CHECK(run("train --modalities q --config " + ws.write("ok.json", kSmoke).string()).code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("gen-data prints counts that match the files") {
  Workspace ws("topicdiff_cli_gen");
  const auto cfg = ws.write("c.json", kSmoke);
  const auto out = ws.dir / "data";
  const Run r = run("gen-data --config " + cfg.string() + " --out " + out.string());
  REQUIRE(r.code == 0);
  for (const char* f : {"meta.json", "train.jsonl", "val.jsonl", "test.jsonl", "config.json"}) CHECK(fs::exists(out / f));

  std::size_t utterances = 0, conversations = 0;
  std::ifstream in(out / "train.jsonl");
  for (std::string line; std::getline(in, line); ++conversations)
    utterances += nlohmann::json::parse(line)["utterances"].size();
  std::istringstream table(r.out);
  std::string name;
  std::size_t convs = 0, utts = 0;
  table >> name >> name >> name;  // header
  table >> name >> convs >> utts;
  CHECK(name == "train");
  CHECK(convs == conversations);
  CHECK(utts == utterances);

  const auto again = ws.dir / "data2";
  REQUIRE(run("gen-data --config " + cfg.string() + " --out " + again.string()).code == 0);
  CHECK(slurp(out / "train.jsonl") == slurp(again / "train.jsonl"));
}

TEST_CASE("train smoke run, --no-tdb naming and reproducible reports") {
  Workspace ws("topicdiff_cli_train");
  const auto cfg = ws.write("c.json", kSmoke);
  const auto a = ws.dir / "a", b = ws.dir / "b", c = ws.dir / "c";
  REQUIRE(run("train --config " + cfg.string() + " --out " + a.string()).code == 0);
  REQUIRE(run("train --config " + cfg.string() + " --out " + b.string()).code == 0);
  for (const char* f : {"report.json", "history.json", "config.json"}) CHECK(slurp(a / f) == slurp(b / f));
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  CHECK(report["reports"][0].contains("weighted_f1"));
  CHECK(report["reports"][0]["variant"] == "TopicDiff");

  REQUIRE(run("train --no-tdb --seed 4 --config " + cfg.string() + " --out " + c.string()).code == 0);
  const auto wo = nlohmann::json::parse(slurp(c / "report.json"));
  CHECK(wo["reports"][0]["variant"] == "TopicDiff w/o TDB");
  CHECK(wo["reports"][0]["seed"] == 4);
  const auto resolved = nlohmann::json::parse(slurp(c / "config.json"));
  CHECK(resolved["seed"] == 4);
  CHECK(resolved["train"]["tdb_enabled"] == false);
}

TEST_CASE("divergence exits 3") {
  Workspace ws("topicdiff_cli_diverge");
  const auto cfg = ws.write("c.json", R"({
    "data": {"synthetic": {"train_conversations": 10, "val_conversations": 4, "test_conversations": 4}},
    "train": {"max_epochs": 2, "patience": 2, "lr_vae": 1e200}})");
  CHECK(run("train --config " + cfg.string() + " --out " + (ws.dir / "out").string()).code == 3);
}

TEST_CASE("diag sde-demo passes and prints its errors") {
  Workspace ws("topicdiff_cli_diag");
  const Run r = run("diag sde-demo --out " + ws.dir.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("langevin") != std::string::npos);
  CHECK(fs::exists(ws.dir / "diag-sde-demo.json"));
}
