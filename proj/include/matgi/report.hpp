#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matgi/eval.hpp"

namespace matgi {

// Metrics for one stage grammar G_k (or a single evaluated grammar).
struct StageMetrics {
  int stage = 0;
  std::string name;
  F1Result f1;
  JsdReport jsd;
  std::optional<LoglikReport> loglik;
  std::size_t parsed = 0;  // N^k, sentences parsed during training
};

// Files written under `directory`:
//   metrics.csv      stage,f1,mean_jsd,mean_loglik,N_parsed
//   jsd_per_nt.csv   stage,nt,jsd
//   metrics.json, jsd_per_nt.json   row-for-row JSON twins
//   summary.json     everything above plus precision/recall/availability
// Floats use 17 significant digits; a missing log-likelihood is "nan".
void write_report(std::span<const StageMetrics> results, const std::string& directory);

std::string metrics_csv(std::span<const StageMetrics> results);
std::string jsd_per_nt_csv(std::span<const StageMetrics> results);

struct MetricsRow {
  int stage = 0;
  double f1 = 0.0;
  double mean_jsd = 0.0;
  double mean_loglik = 0.0;
  std::size_t parsed = 0;
};

std::vector<MetricsRow> read_metrics_csv(const std::string& text);

// JSON array of row objects for a headed CSV; numeric fields become numbers.
std::string csv_to_json(const std::string& csv);

// Writes <directory>/<stem>.csv and its <stem>.json twin.
void write_csv_pair(const std::string& directory, const std::string& stem, const std::string& csv);

}  // namespace matgi
