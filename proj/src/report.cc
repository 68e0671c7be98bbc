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

#include "craft/report.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "craft/config.h"
#include "craft/errors.h"

namespace craft {
namespace {

std::string Num(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.10g", v);
  return buf.data();
}

void WriteFile(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const RoundRecord* LastEvaluated(const std::vector<RoundRecord>& records) {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->evaluated()) return &*it;
  }
  return nullptr;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void PrepareOutputDir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
  const std::filesystem::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string SummaryCsv(const std::vector<RoundRecord>& records) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const RoundRecord& r : records) {
    if (!r.evaluated()) continue;
    const Summary& s = *r.summary;
    out += std::to_string(r.round) + "," + Num(s.mean) + "," + Num(s.best10) + "," +
           Num(s.worst10) + "," + Num(s.std) + "," + std::to_string(r.conflicts) + "," +
           Num(r.residual_norm) + "\n";
  }
  return out;
}

std::string AccuracyCsv(const std::vector<RoundRecord>& records) {
  std::string out = std::string(kAccuracyHeader) + "\n";
  for (const RoundRecord& r : records) {
    for (std::size_t k = 0; k < r.accuracies.size(); ++k) {
      out += std::to_string(r.round) + "," + std::to_string(k) + "," +
             Num(r.accuracies[k]) + "\n";
    }
  }
  return out;
}

std::string DiagnosticsCsv(const std::vector<RoundRecord>& records) {
  std::string out = std::string(kDiagnosticsHeader) + "\n";
  for (const RoundRecord& r : records) {
    out += std::to_string(r.round) + "," + std::to_string(r.conflicts) + "," +
           std::to_string(r.active_conflicts) + "," + Num(r.residual_norm) + "," +
           (r.full_rank ? "1" : "0") + "," + Num(r.wall_ms) + "\n";
  }
  return out;
}

std::string HistogramCsv(const std::vector<double>& accuracies, int bins) {
  std::vector<int> counts(bins, 0);
  for (double a : accuracies) {
    const int b = std::clamp(static_cast<int>(a * bins), 0, bins - 1);
    ++counts[b];
  }
  std::string out = std::string(kHistogramHeader) + "\n";
  for (int b = 0; b < bins; ++b) {
    out += Num(static_cast<double>(b) / bins) + "," +
           Num(static_cast<double>(b + 1) / bins) + "," + std::to_string(counts[b]) + "\n";
  }
  return out;
}

void WriteRunDirectory(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const std::vector<RoundRecord>& records, const RunTimes& times) {
  const std::string yaml = SerializeConfig(config);
  WriteFile(dir / "config.yaml", yaml);
  WriteFile(dir / "summary.csv", SummaryCsv(records));
  WriteFile(dir / "accuracy.csv", AccuracyCsv(records));
  WriteFile(dir / "diagnostics.csv", DiagnosticsCsv(records));
  const RoundRecord* last = LastEvaluated(records);
  WriteFile(dir / "histogram.csv",
            HistogramCsv(last ? last->accuracies : std::vector<double>{}));

  nlohmann::ordered_json manifest;
  manifest["tool"] = "craft";
  manifest["version"] = kToolVersion;
  manifest["name"] = config.name;
  manifest["status"] = "complete";
  manifest["rounds_completed"] = records.size();
  manifest["seeds"] = {{"data", config.seeds.data},
                       {"partition", config.seeds.partition},
                       {"init", config.seeds.init},
                       {"sampling", config.seeds.sampling},
                       {"training", config.seeds.training}};
  manifest["config"] = yaml;
  manifest["artifacts"] = {"config.yaml", "summary.csv", "accuracy.csv",
                           "diagnostics.csv", "histogram.csv"};
  manifest["started_at"] = times.started;
  manifest["finished_at"] = times.finished;
  WriteFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

RunData ReadRun(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("incomplete run directory " + dir.string() + ": no manifest.json");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(ReadFile(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("status", "") != "complete") {
    throw IoError("incomplete run directory " + dir.string() + ": status is not complete");
  }
  const std::filesystem::path summary_path = dir / "summary.csv";
  if (!std::filesystem::exists(summary_path)) {
    throw IoError("incomplete run directory " + dir.string() + ": no summary.csv");
  }

  RunData run;
  run.name = std::filesystem::absolute(dir).lexically_normal().filename().string();
  if (run.name.empty()) {
    run.name = std::filesystem::absolute(dir).lexically_normal().parent_path().filename().string();
  }
  std::istringstream in(ReadFile(summary_path));
  std::string line;
  std::getline(in, line);
  if (line != kSummaryHeader) {
    throw IoError(summary_path.string() + ": unexpected header '" + line + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != 7) {
      throw IoError(summary_path.string() + ":" + std::to_string(line_no) +
                    ": expected 7 columns");
    }
    try {
      SummaryRow row;
      row.round = std::stoi(cells[0]);
      row.summary = {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                     std::stod(cells[4])};
      row.conflicts = std::stoi(cells[5]);
      row.residual = std::stod(cells[6]);
      run.rows.push_back(row);
    } catch (const std::exception&) {
      throw IoError(summary_path.string() + ":" + std::to_string(line_no) +
                    ": unparseable cell");
    }
  }
  if (run.rows.empty()) {
    throw IoError("incomplete run directory " + dir.string() + ": summary.csv has no rows");
  }
  return run;
}

std::string CompareTable(const std::vector<RunData>& runs) {
  struct Column {
    const char* title;
    double Summary::*field;
    bool higher_is_better;
  };
  const Column columns[] = {{"Mean", &Summary::mean, true},
                            {"Best10", &Summary::best10, true},
                            {"Worst10", &Summary::worst10, true},
                            {"Std", &Summary::std, false}};

  const std::size_t n = runs.size();
  std::vector<std::array<std::string, 4>> marks(n);
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = runs[a].rows.back().summary.*columns[c].field;
      const double vb = runs[b].rows.back().summary.*columns[c].field;
      if (va != vb) return columns[c].higher_is_better ? va > vb : va < vb;
      return runs[a].name < runs[b].name;
    });
    if (n >= 1) marks[order[0]][c] = "*";
    if (n >= 2) marks[order[1]][c] = "_";
  }

  std::size_t name_width = 3;
  for (const RunData& r : runs) name_width = std::max(name_width, r.name.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_width)) << "Run";
  for (const Column& col : columns) os << "  " << std::right << std::setw(9) << col.title;
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    const Summary& s = runs[i].rows.back().summary;
    os << std::left << std::setw(static_cast<int>(name_width)) << runs[i].name;
    for (std::size_t c = 0; c < 4; ++c) {
      std::ostringstream cell;
      cell << marks[i][c] << std::fixed << std::setprecision(4) << s.*columns[c].field;
      os << "  " << std::right << std::setw(9) << cell.str();
    }
    os << "\n";
  }
  return os.str();
}

std::string ConvergenceSvg(const std::vector<RunData>& runs) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 150, kTop = 20,
                   kBottom = 50;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  int max_round = 1;
  for (const RunData& r : runs) {
    for (const SummaryRow& row : r.rows) max_round = std::max(max_round, row.round);
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double round) { return kLeft + plot_w * round / max_round; };
  auto py = [&](double acc) { return kTop + plot_h * (1.0 - std::clamp(acc, 0.0, 1.0)); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
     << kLeft + plot_w << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
     << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 10; tick += 2) {
    const double y = py(tick / 10.0);
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << tick / 10.0 << "</text>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
     << "\" font-size=\"12\" text-anchor=\"middle\">communication round</text>\n";
  os << "<text x=\"16\" y=\"" << kTop + plot_h / 2
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kTop + plot_h / 2 << ")\">mean client accuracy</text>\n";

  for (std::size_t i = 0; i < runs.size(); ++i) {
    const char* color = palette[i % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < runs[i].rows.size(); ++k) {
      const SummaryRow& row = runs[i].rows[k];
      os << (k ? " " : "") << px(row.round) << "," << py(row.summary.mean);
    }
    os << "\"/>\n";
    const double ly = kTop + 16.0 * (i + 1);
    os << "<text x=\"" << kLeft + plot_w + 10 << "\" y=\"" << ly << "\" font-size=\"11\" fill=\""
       << color << "\">" << XmlEscape(runs[i].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace craft
