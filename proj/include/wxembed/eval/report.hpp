#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wxe {

/// One (timestamp, variable, model) evaluation, in physical units.
struct MetricRecord {
  std::string timestamp;  // "YYYY-MM-DDTHH"
  std::string variable;
  std::string model_tag;
  double rmse = 0.0;
  double ssim = 0.0;
  bool operator==(const MetricRecord&) const = default;
};

/// Mean and sample sigma of the records sharing (variable, model_tag).
struct AggregateRecord {
  std::string variable;
  std::string model_tag;
  std::size_t n = 0;
  double rmse_mean = 0.0;
  double rmse_sigma = 0.0;
  double ssim_mean = 0.0;
  double ssim_sigma = 0.0;
  bool operator==(const AggregateRecord&) const = default;
};

struct MetricReport {
  std::vector<MetricRecord> records;
  std::vector<AggregateRecord> aggregates;
  nlohmann::json metadata = nlohmann::json::object();
  bool operator==(const MetricReport&) const = default;
};

/// Groups in order of first appearance; values reduced in record order.
std::vector<AggregateRecord> aggregate(const std::vector<MetricRecord>& records);

inline constexpr const char* kReportCsvHeader = "timestamp,variable,model_tag,rmse,ssim";
inline constexpr const char* kAggregateCsvHeader = "variable,model_tag,n,rmse_mean,rmse_sigma,ssim_mean,ssim_sigma";

enum class ReportFormat { Csv, Json };
ReportFormat parse_report_format(const std::string& s);

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Json: the whole report. Csv: per-timestamp rows under kReportCsvHeader, with
/// full-precision values. Throws Error when the path cannot be written.
void emit_report(const MetricReport& report, ReportFormat format, const std::string& path);
/// Aggregates under kAggregateCsvHeader.
void emit_aggregates_csv(const std::vector<AggregateRecord>& aggregates, const std::string& path);
MetricReport read_report_json(const std::string& path);

}  // namespace wxe
