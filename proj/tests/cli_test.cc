// Copyright 2026 The CRAFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "craft/cli.h"
#include "craft/config.h"
#include "craft/errors.h"
#include "craft/report.h"

namespace craft {
namespace {

namespace fs = std::filesystem;

fs::path TmpDir(const std::string& name) {
  const fs::path dir = fs::path(CRAFT_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void Spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string ErrorMessage(std::string_view yaml) {
  try {
    ParseConfigText(yaml, ".");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

constexpr const char* kTinyConfig = R"(name: tiny
dataset:
  kind: synthetic
  classes: 3
  features: 6
  samples: 240
model:
  hidden: [5]
federation:
  clients: 4
  clients_per_round: 2
  rounds: 4
  batch_size: 16
  local_steps: 2
  min_per_client: 10
  eval_every: 2
aggregator:
  kind: craft
)";

TEST_CASE("minimal config takes documented defaults") {
  const ExperimentConfig c = ParseConfigText("dataset: {kind: synthetic}\naggregator: {kind: fedavg}\n", ".");
  const ExperimentConfig d = [] {
    ExperimentConfig x;
    x.aggregator.kind = AggregatorKind::kFedAvg;
    return x;
  }();
  CHECK(c.federation == d.federation);
  CHECK(c.seeds == d.seeds);
  CHECK(c.hidden_dims == std::vector<int>{200, 200});
  CHECK(c.aggregator.tau == doctest::Approx(1e-6));
}

TEST_CASE("config errors name the offending key") {
  SUBCASE("more sampled clients than clients") {
    const std::string msg = ErrorMessage(
        "dataset: {kind: synthetic}\naggregator: {kind: craft}\n"
        "federation: {clients: 5, clients_per_round: 6}\n");
    CHECK(msg.find("federation.clients_per_round") != std::string::npos);
    CHECK(msg.find("federation.clients") != std::string::npos);
  }
  SUBCASE("unknown key with its line") {
    const std::string msg = ErrorMessage(
        "dataset: {kind: synthetic}\naggregator:\n  kind: craft\n  gamma: 2\n");
    CHECK(msg.find("gamma") != std::string::npos);
    CHECK(msg.find("line 4") != std::string::npos);
  }
  SUBCASE("missing required kind") {
    CHECK(ErrorMessage("dataset: {kind: synthetic}\n").find("aggregator") !=
          std::string::npos);
  }
  SUBCASE("missing required kind inside a section") {
    CHECK(ErrorMessage("dataset: {kind: synthetic}\naggregator: {tau: 1}\n")
              .find("aggregator.kind") != std::string::npos);
  }
  SUBCASE("unknown aggregator") {
    CHECK(!ErrorMessage("dataset: {kind: synthetic}\naggregator: {kind: sgd}\n").empty());
  }
  SUBCASE("syntax error") {
    CHECK(ErrorMessage("dataset: [kind\n").find("line") != std::string::npos);
  }
  SUBCASE("non-positive rounds") {
    CHECK(ErrorMessage("dataset: {kind: synthetic}\naggregator: {kind: craft}\n"
                       "federation: {rounds: 0}\n")
              .find("federation.rounds") != std::string::npos);
  }
}

TEST_CASE("config round trip") {
  ExperimentConfig c = ParseConfigText(kTinyConfig, ".");
  c.aggregator.epsilon = 1.0 / 3.0;
  c.federation.client_lr = 0.1 + 0.2;
  c.seeds.training = 0xFFFFFFFFFFFFull;
  const ExperimentConfig back = ParseConfigText(SerializeConfig(c), ".");
  CHECK(back == c);
  CHECK(SerializeConfig(back) == SerializeConfig(c));
}

TEST_CASE("seed overrides") {
  ExperimentConfig c = ParseConfigText(kTinyConfig, ".");
  ApplySeedOverride(c, "partition=17");
  CHECK(c.seeds.partition == 17);
  CHECK_THROWS_AS(ApplySeedOverride(c, "colour=1"), ConfigError);
  CHECK_THROWS_AS(ApplySeedOverride(c, "init"), ConfigError);
  CHECK_THROWS_AS(ApplySeedOverride(c, "init=x"), ConfigError);
}

TEST_CASE("run writes a complete, reproducible directory") {
  const fs::path dir = TmpDir("run");
  Spit(dir / "tiny.yaml", kTinyConfig);

  RunCommand cmd;
  cmd.config = dir / "tiny.yaml";
  cmd.out_dir = dir / "a";
  std::ostringstream out, err;
  REQUIRE(CmdRun(cmd, out, err) == kExitOk);
  CHECK(err.str().empty());
  for (const char* f : {"config.yaml", "summary.csv", "accuracy.csv", "diagnostics.csv",
                        "histogram.csv", "manifest.json"}) {
    CHECK(fs::exists(cmd.out_dir / f));
  }
  const std::string summary = Slurp(cmd.out_dir / "summary.csv");
  CHECK(summary.rfind("round,mean,best10,worst10,std,conflicts,residual\n", 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);  // header + rounds 1, 3

  SUBCASE("same config twice") {
    cmd.out_dir = dir / "b";
    cmd.quiet = true;
    std::ostringstream o2;
    REQUIRE(CmdRun(cmd, o2, err) == kExitOk);
    CHECK(o2.str().empty());
    CHECK(Slurp(dir / "b" / "summary.csv") == summary);
    CHECK(Slurp(dir / "b" / "accuracy.csv") == Slurp(dir / "a" / "accuracy.csv"));
  }
  SUBCASE("rerun from the manifest") {
    RunCommand again;
    again.config = dir / "a" / "manifest.json";
    again.out_dir = dir / "c";
    again.quiet = true;
    REQUIRE(CmdRun(again, out, err) == kExitOk);
    CHECK(Slurp(dir / "c" / "summary.csv") == summary);
  }
  SUBCASE("seed override changes the run") {
    cmd.out_dir = dir / "d";
    cmd.quiet = true;
    cmd.seed_overrides = {"sampling=123"};
    REQUIRE(CmdRun(cmd, out, err) == kExitOk);
    CHECK(Slurp(dir / "d" / "config.yaml").find("sampling: 123") != std::string::npos);
  }
}

TEST_CASE("run failures map to exit codes") {
  const fs::path dir = TmpDir("fail");
  Spit(dir / "tiny.yaml", kTinyConfig);
  std::ostringstream out, err;

  RunCommand bad_config;
  bad_config.config = dir / "missing.yaml";
  bad_config.out_dir = dir / "x";
  CHECK(CmdRun(bad_config, out, err) == kExitConfig);
  CHECK(err.str().find("\"status\":\"error\"") != std::string::npos);

  Spit(dir / "blocker", "not a directory");
  RunCommand unwritable;
  unwritable.config = dir / "tiny.yaml";
  unwritable.out_dir = dir / "blocker" / "sub";
  unwritable.quiet = true;
  CHECK(CmdRun(unwritable, out, err) == kExitOutput);

  RunCommand bad_override;
  bad_override.config = dir / "tiny.yaml";
  bad_override.out_dir = dir / "y";
  bad_override.seed_overrides = {"nope=1"};
  CHECK(CmdRun(bad_override, out, err) == kExitConfig);
}

RunData FakeRun(const std::string& name, double mean, double std) {
  RunData r;
  r.name = name;
  SummaryRow row;
  row.round = 9;
  row.summary = Summary{mean, mean + 0.1, mean - 0.1, std};
  r.rows.push_back(row);
  return r;
}

TEST_CASE("compare table marks best and runner-up") {
  const std::string table =
      CompareTable({FakeRun("fedavg", 0.70, 0.10), FakeRun("craft", 0.80, 0.05),
                    FakeRun("config", 0.75, 0.20)});
  std::istringstream lines(table);
  std::string header, fedavg, craft, config;
  std::getline(lines, header);
  std::getline(lines, fedavg);
  std::getline(lines, craft);
  std::getline(lines, config);
  CHECK(craft.find("*0.8000") != std::string::npos);
  CHECK(config.find("_0.7500") != std::string::npos);
  CHECK(craft.find("*0.0500") != std::string::npos);
  CHECK(fedavg.find("_0.1000") != std::string::npos);

  const std::string tie = CompareTable({FakeRun("b", 0.5, 0.1), FakeRun("a", 0.5, 0.1)});
  CHECK(tie.find("a  ") != std::string::npos);
  std::istringstream tl(tie);
  std::string h, b_line, a_line;
  std::getline(tl, h);
  std::getline(tl, b_line);
  std::getline(tl, a_line);
  CHECK(a_line.find("*0.5000") != std::string::npos);
  CHECK(b_line.find("_0.5000") != std::string::npos);
}

TEST_CASE("compare command") {
  const fs::path dir = TmpDir("compare");
  Spit(dir / "tiny.yaml", kTinyConfig);
  std::ostringstream out, err;
  for (const char* agg : {"craft", "fedavg"}) {
    std::string text = kTinyConfig;
    text.replace(text.find("kind: craft"), 11, std::string("kind: ") + agg);
    Spit(dir / (std::string(agg) + ".yaml"), text);
    RunCommand cmd;
    cmd.config = dir / (std::string(agg) + ".yaml");
    cmd.out_dir = dir / agg;
    cmd.quiet = true;
    REQUIRE(CmdRun(cmd, out, err) == kExitOk);
  }

  CompareCommand cmp;
  cmp.run_dirs = {dir / "craft", dir / "fedavg"};
  cmp.svg_out = dir / "plot.svg";
  std::ostringstream table;
  CHECK(CmdCompare(cmp, table, err) == kExitOk);
  CHECK(table.str().find("craft") != std::string::npos);
  const std::string svg = Slurp(dir / "plot.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("fedavg") != std::string::npos);

  fs::create_directories(dir / "half");
  Spit(dir / "half" / "summary.csv", "round,mean,best10,worst10,std,conflicts,residual\n");
  cmp.run_dirs = {dir / "craft", dir / "half"};
  cmp.svg_out.clear();
  std::ostringstream e2;
  CHECK(CmdCompare(cmp, table, e2) == kExitBadRun);
  CHECK(e2.str().find("half") != std::string::npos);

  cmp.run_dirs = {dir / "craft"};
  CHECK(CmdCompare(cmp, table, e2) == kExitUsage);
}

TEST_CASE("histogram") {
  const std::string h = HistogramCsv({0.0, 0.05, 0.5, 1.0}, 2);
  CHECK(h == "bin_lower,bin_upper,count\n0,0.5,2\n0.5,1,2\n");
}

}  // namespace
}  // namespace craft
