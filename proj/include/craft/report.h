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

// Run directories and run comparison.
//
// A completed run directory holds
//   manifest.json    config snapshot, seeds, artifact list, timestamps
//   config.yaml      the resolved configuration (parses back unchanged)
//   accuracy.csv     round,client_id,accuracy          (evaluated rounds)
//   summary.csv      round,mean,best10,worst10,std,conflicts,residual
//   diagnostics.csv  round,conflicts,active_conflicts,residual,full_rank,wall_ms
//   histogram.csv    bin_lower,bin_upper,count          (final accuracies)
// Everything except manifest.json and the wall_ms column is a pure function
// of the configuration.

#include <filesystem>
#include <string>
#include <vector>

#include "craft/simulation.h"

namespace craft {

inline constexpr const char* kToolVersion = "0.3.0";

inline constexpr const char* kSummaryHeader =
    "round,mean,best10,worst10,std,conflicts,residual";
inline constexpr const char* kAccuracyHeader = "round,client_id,accuracy";
inline constexpr const char* kDiagnosticsHeader =
    "round,conflicts,active_conflicts,residual,full_rank,wall_ms";
inline constexpr const char* kHistogramHeader = "bin_lower,bin_upper,count";

// Creates `dir` if needed and checks that a file can be written there.
// Throws IoError otherwise.
void PrepareOutputDir(const std::filesystem::path& dir);

struct RunTimes {
  std::string started;   // ISO-8601 UTC
  std::string finished;
};

std::string UtcTimestamp();

// Writes every artifact listed above. Throws IoError on write failure.
void WriteRunDirectory(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const std::vector<RoundRecord>& records, const RunTimes& times);

std::string SummaryCsv(const std::vector<RoundRecord>& records);
std::string AccuracyCsv(const std::vector<RoundRecord>& records);
std::string DiagnosticsCsv(const std::vector<RoundRecord>& records);
std::string HistogramCsv(const std::vector<double>& accuracies, int bins = 10);

struct SummaryRow {
  int round = 0;
  Summary summary;
  int conflicts = 0;
  double residual = 0.0;
};

struct RunData {
  std::string name;  // directory name
  std::vector<SummaryRow> rows;
};

// Reads summary.csv of a completed run (manifest.json with status
// "complete" must exist). Throws IoError for incomplete or malformed runs.
RunData ReadRun(const std::filesystem::path& dir);

// Fixed-width table of the final Mean/Best10/Worst10/Std per run. In every
// column the best value is prefixed with '*' and the runner-up with '_'
// (lower is better for Std); ties go to the lexicographically smaller name.
std::string CompareTable(const std::vector<RunData>& runs);

// Mean accuracy against round, one polyline per run.
std::string ConvergenceSvg(const std::vector<RunData>& runs);

}  // namespace craft
