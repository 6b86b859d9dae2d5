#include "uda/harness/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace uda {

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<MethodSummary> summarize_reports(const std::vector<EvalReport>& reports) {
  std::map<std::string, std::vector<double>> by_method;
  std::vector<std::string> order;  // first-seen order
  for (const EvalReport& r : reports) {
    const std::string key = r.method.empty() ? "(unknown)" : r.method;
    if (!by_method.count(key)) order.push_back(key);
    by_method[key].push_back(r.map50);
  }
  std::vector<MethodSummary> out;
  for (const std::string& m : order) {
    const auto& maps = by_method[m];
    MethodSummary s;
    s.method = m;
    s.runs = static_cast<int>(maps.size());
    s.median_map = median(maps);
    double sum = 0;
    s.min_map = maps[0];
    s.max_map = maps[0];
    for (double v : maps) {
      sum += v;
      s.min_map = std::min(s.min_map, v);
      s.max_map = std::max(s.max_map, v);
    }
    s.mean_map = sum / maps.size();
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_summary_table(const std::vector<MethodSummary>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %5s  %10s  %10s  %10s  %10s\n",
                static_cast<int>(width), "method", "runs", "median_mAP", "mean_mAP", "min_mAP",
                "max_mAP");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-*s  %5d  %10.4f  %10.4f  %10.4f  %10.4f\n",
                  static_cast<int>(width), r.method.c_str(), r.runs, r.median_map, r.mean_map,
                  r.min_map, r.max_map);
    out << line;
  }
  return out.str();
}

std::string format_summary_csv(const std::vector<MethodSummary>& rows) {
  std::ostringstream out;
  out << "method,runs,median_map,mean_map,min_map,max_map\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f,%.6f,%.6f\n", r.method.c_str(), r.runs,
                  r.median_map, r.mean_map, r.min_map, r.max_map);
    out << line;
  }
  return out.str();
}

}  // namespace uda
