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

#include <iostream>

#include <CLI11.hpp>

#include "craft/cli.h"
#include "craft/report.h"

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with conflict-resolved aggregation"};
  app.set_version_flag("--version", std::string(craft::kToolVersion));
  app.require_subcommand(1);

  craft::RunCommand run;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment");
  run_cmd->add_option("config", run.config, "YAML config or manifest.json of a previous run")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run_out, "Output directory")->required();
  run_cmd->add_option("--seed-override", run.seed_overrides,
                      "Override a seed, e.g. --seed-override partition=7");
  run_cmd->add_flag("--quiet", run.quiet, "Suppress progress output");

  craft::CompareCommand compare;
  std::string svg_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare completed runs");
  cmp_cmd->add_option("runs", compare.run_dirs, "Run directories")->required()->expected(2, -1);
  cmp_cmd->add_option("--out", svg_out, "SVG path for the convergence plot");
  bool quiet_compare = false;
  cmp_cmd->add_flag("--quiet", quiet_compare, "Accepted for symmetry; compare prints only the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : craft::kExitUsage;
  }

  if (run_cmd->parsed()) {
    run.out_dir = run_out;
    return craft::CmdRun(run, std::cout, std::cerr);
  }
  compare.svg_out = svg_out;
  return craft::CmdCompare(compare, std::cout, std::cerr);
}
