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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace craft {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitOutput = 3,     // output directory missing permissions or write failure
  kExitRuntime = 4,    // failure while running the experiment
  kExitBadRun = 5,     // compare: incomplete or malformed run directory
};

struct RunCommand {
  std::filesystem::path config;  // YAML config or a previous run's manifest.json
  std::filesystem::path out_dir;
  std::vector<std::string> seed_overrides;  // "name=value"
  bool quiet = false;
};

// Runs one experiment into `out_dir`. Failures are reported as a JSON error
// record on `err` (and in out_dir/error.json when the directory is usable).
int CmdRun(const RunCommand& cmd, std::ostream& out, std::ostream& err);

struct CompareCommand {
  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path svg_out;
};

// Prints the comparison table to `out` and writes the SVG. Never modifies the
// run directories.
int CmdCompare(const CompareCommand& cmd, std::ostream& out, std::ostream& err);

}  // namespace craft
