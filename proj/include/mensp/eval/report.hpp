#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mensp/eval/experiment.hpp"

namespace mensp {

enum class ReportFormat { markdown, csv };

/// "30.3±0.3": mean and std scaled to percent with one decimal.
std::string format_percent_cell(double mean, double std);

/// Rows (shot, sample strategy, model) by per-item Kappa(%) and F1(%)
/// columns, or one CSV line per (item, row) with six-decimal statistics.
/// Output depends only on the report contents.
std::string render_report(const MetricReport& report, ReportFormat format);

struct CsvCell {
  std::string item;
  int shot = 0;
  std::string strategy;
  std::string model;
  int seeds = 0;
  std::optional<double> kappa_mean, kappa_std, f1_mean, f1_std;
  std::string error;
};

/// Inverse of the CSV rendering. Throws DataError on malformed input.
std::vector<CsvCell> parse_report_csv(const std::string& text);

}  // namespace mensp
