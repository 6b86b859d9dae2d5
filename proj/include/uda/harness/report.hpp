#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uda/harness/evaluator.hpp"

namespace uda {

struct MethodSummary {
  std::string method;
  int runs = 0;
  double median_map = 0.0;
  double mean_map = 0.0;
  double min_map = 0.0;
  double max_map = 0.0;
};

/// Groups reports by method and summarizes mAP across seeds/runs.
std::vector<MethodSummary> summarize_reports(const std::vector<EvalReport>& reports);

/// Aligned text table, one row per method.
std::string format_summary_table(const std::vector<MethodSummary>& rows);
/// CSV rows: method,runs,median_map,mean_map,min_map,max_map.
std::string format_summary_csv(const std::vector<MethodSummary>& rows);

double median(std::vector<double> values);

}  // namespace uda
