#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pairnas::experiment {

struct ReportRow {
  std::string dataset, embedding, model;
  std::string cells;   // "E / L"
  std::string source;  // transfer source dataset, else empty
  std::string metric;  // "pearson" or "accuracy"
  double dev = 0.0, test = 0.0;
  int trials = 0, failed = 0;
  double hpt_seconds = 0.0;
  bool complete = false;
  bool tie = false;
  bool metric_defined = true;  // false when dev or test Pearson had zero variance
  std::string run_dir;
};

// Each path is a run directory or a directory of run directories. Search
// runs are skipped. Rows are sorted by (dataset, model, cells, source).
std::vector<ReportRow> collect_rows(const std::vector<std::filesystem::path>& paths);

std::string format_tsv(const std::vector<ReportRow>& rows);
// Aligned table followed by a footer naming the build version and the run
// directories read.
std::string format_table(const std::vector<ReportRow>& rows);

}  // namespace pairnas::experiment
