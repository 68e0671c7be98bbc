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

#include "craft/cli.h"

#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "craft/config.h"
#include "craft/errors.h"
#include "craft/report.h"

namespace craft {
namespace {

int Fail(std::ostream& err, const std::filesystem::path* out_dir, int code,
         const std::string& kind, const std::string& message) {
  nlohmann::ordered_json record;
  record["status"] = "error";
  record["kind"] = kind;
  record["exit_code"] = code;
  record["message"] = message;
  err << record.dump() << "\n";
  if (out_dir != nullptr) {
    std::ofstream f(*out_dir / "error.json");
    if (f) f << record.dump(2) << "\n";
  }
  return code;
}

// Accepts a YAML config or the manifest.json of an earlier run.
ExperimentConfig LoadRunConfig(const std::filesystem::path& path) {
  if (path.extension() != ".json") return ParseConfig(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (!manifest.contains("config") || !manifest["config"].is_string()) {
    throw ConfigError("manifest " + path.string() + " has no config snapshot");
  }
  return ParseConfigText(manifest["config"].get<std::string>(), path.parent_path());
}

}  // namespace

int CmdRun(const RunCommand& cmd, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = LoadRunConfig(cmd.config);
    for (const std::string& o : cmd.seed_overrides) ApplySeedOverride(config, o);
    config.Validate();
  } catch (const ConfigError& e) {
    return Fail(err, nullptr, kExitConfig, "config", e.what());
  } catch (const IoError& e) {
    return Fail(err, nullptr, kExitConfig, "config", e.what());
  }

  try {
    PrepareOutputDir(cmd.out_dir);
  } catch (const IoError& e) {
    return Fail(err, nullptr, kExitOutput, "output", e.what());
  }

  RunTimes times;
  times.started = UtcTimestamp();
  std::vector<RoundRecord> records;
  try {
    Simulation sim(config);
    for (int t = 0; t < config.federation.rounds; ++t) {
      records.push_back(sim.RunRound(t));
      const RoundRecord& r = records.back();
      if (!cmd.quiet && r.evaluated()) {
        out << "round " << r.round << "  mean " << r.summary->mean << "  worst10 "
            << r.summary->worst10 << "  std " << r.summary->std << "  conflicts "
            << r.conflicts << "\n";
      }
    }
  } catch (const ConfigError& e) {
    return Fail(err, &cmd.out_dir, kExitConfig, "config", e.what());
  } catch (const std::exception& e) {
    std::ostringstream msg;
    msg << "failed at round " << records.size() << ": " << e.what();
    return Fail(err, &cmd.out_dir, kExitRuntime, "runtime", msg.str());
  }
  times.finished = UtcTimestamp();

  try {
    WriteRunDirectory(cmd.out_dir, config, records, times);
  } catch (const IoError& e) {
    return Fail(err, &cmd.out_dir, kExitOutput, "output", e.what());
  }
  if (!cmd.quiet) out << "wrote " << cmd.out_dir.string() << "\n";
  return kExitOk;
}

int CmdCompare(const CompareCommand& cmd, std::ostream& out, std::ostream& err) {
  if (cmd.run_dirs.size() < 2) {
    return Fail(err, nullptr, kExitUsage, "usage", "compare needs at least two run directories");
  }
  std::vector<RunData> runs;
  try {
    for (const auto& dir : cmd.run_dirs) runs.push_back(ReadRun(dir));
  } catch (const IoError& e) {
    return Fail(err, nullptr, kExitBadRun, "run", e.what());
  }

  out << CompareTable(runs);
  if (!cmd.svg_out.empty()) {
    std::ofstream svg(cmd.svg_out, std::ios::binary | std::ios::trunc);
    if (!svg) {
      return Fail(err, nullptr, kExitOutput, "output",
                  "cannot write " + cmd.svg_out.string());
    }
    svg << ConvergenceSvg(runs);
  }
  return kExitOk;
}

}  // namespace craft
