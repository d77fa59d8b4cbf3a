#include "pairnas/experiment/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "pairnas/error.hpp"
#include "pairnas/hpt/study.hpp"

#ifndef PAIRNAS_VERSION
#define PAIRNAS_VERSION "unknown"
#endif

namespace pairnas::experiment {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

bool is_run_dir(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "config.json"); }

ReportRow read_row(const std::filesystem::path& dir) {
  const json snap = parse_file(dir / "config.json");
  const json& exp = snap.at("experiment");
  ReportRow row;
  row.dataset = exp.at("dataset").at("name").get<std::string>();
  row.embedding = exp.at("embedding").at("name").get<std::string>();
  row.model = exp.at("model").get<std::string>();
  row.cells = snap.at("plan").get<std::string>();
  row.source = snap.value("source_dataset", std::string());
  row.trials = snap.at("trials").get<int>();
  row.run_dir = dir.string();

  if (std::filesystem::exists(dir / "study.jsonl")) {
    for (const auto& t : hpt::read_study_log(dir / "study.jsonl")) {
      row.hpt_seconds += t.seconds;
      row.failed += t.status == hpt::TrialStatus::Failed;
    }
  }
  if (std::filesystem::exists(dir / "best.json")) {
    const json best = parse_file(dir / "best.json");
    const json& dev = best.at("dev");
    const bool regression = dev.at("task").get<std::string>() == "regression";
    row.metric = regression ? "pearson" : "accuracy";
    row.dev = dev.at("primary").get<double>();
    row.test = best.at("test").at("primary").get<double>();
    row.tie = best.value("tie", false);
    row.metric_defined = dev.at("pearson_defined").get<bool>() && best.at("test").at("pearson_defined").get<bool>();
    row.complete = true;
  }
  return row;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::vector<std::string> cells_of(const ReportRow& r) {
  return {r.dataset,
          r.embedding,
          r.model,
          r.cells,
          r.source.empty() ? "-" : r.source,
          r.complete ? r.metric : "-",
          r.complete ? fixed(r.dev, 4) : "-",
          r.complete ? fixed(r.test, 4) : "-",
          std::to_string(r.trials),
          std::to_string(r.failed),
          fixed(r.hpt_seconds, 1),
          !r.complete ? "pending" : !r.metric_defined ? "done (undefined metric)" : r.tie ? "done (tied best)" : "done"};
}

const std::vector<std::string> kHeader = {"dataset", "embedding", "model", "cells",  "source", "metric",
                                          "dev",     "test",      "trials", "failed", "hpt_s",  "status"};

}  // namespace

std::vector<ReportRow> collect_rows(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& p : paths) {
    if (!std::filesystem::is_directory(p)) throw ConfigError("not a directory: " + p.string());
    if (is_run_dir(p)) {
      dirs.push_back(p);
      continue;
    }
    for (const auto& entry : std::filesystem::directory_iterator(p)) {
      if (entry.is_directory() && is_run_dir(entry.path())) dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());

  std::vector<ReportRow> rows;
  for (const auto& d : dirs) {
    // Search directories hold a search config without a study plan.
    const json snap = parse_file(d / "config.json");
    if (!snap.contains("plan") || snap.value("command", std::string()) == "search") continue;
    rows.push_back(read_row(d));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.dataset, a.model, a.cells, a.source) < std::tie(b.dataset, b.model, b.cells, b.source);
  });
  return rows;
}

std::string format_tsv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "\t" : "") << cells[i];
    os << "\n";
  };
  line(kHeader);
  for (const auto& r : rows) line(cells_of(r));
  return os.str();
}

std::string format_table(const std::vector<ReportRow>& rows) {
  std::vector<std::vector<std::string>> grid = {kHeader};
  for (const auto& r : rows) grid.push_back(cells_of(r));
  std::vector<std::size_t> width(kHeader.size(), 0);
  for (const auto& g : grid) {
    for (std::size_t i = 0; i < g.size(); ++i) width[i] = std::max(width[i], g[i].size());
  }
  std::ostringstream os;
  for (const auto& g : grid) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      os << std::left << std::setw(static_cast<int>(width[i])) << g[i] << (i + 1 < g.size() ? "  " : "");
    }
    os << "\n";
  }
  os << "\npairnas " << PAIRNAS_VERSION << "\n";
  for (const auto& r : rows) os << "  " << r.run_dir << "/config.json\n";
  return os.str();
}

}  // namespace pairnas::experiment
