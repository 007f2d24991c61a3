#include "wxembed/eval/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <utility>

#include "wxembed/core/error.hpp"
#include "wxembed/eval/metrics.hpp"

namespace wxe {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write report '" + path + "'");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error("failed writing report '" + path + "'");
}

}  // namespace

std::vector<AggregateRecord> aggregate(const std::vector<MetricRecord>& records) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto key = std::make_pair(r.variable, r.model_tag);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.first.push_back(r.rmse);
    it->second.second.push_back(r.ssim);
  }
  std::vector<AggregateRecord> out;
  for (const auto& key : order) {
    const auto& [rm, ss] = groups.at(key);
    const auto a = mean_sigma(rm), b = mean_sigma(ss);
    out.push_back({key.first, key.second, rm.size(), a.mean, a.sigma, b.mean, b.sigma});
  }
  return out;
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw UsageError("unknown report format '" + s + "' (expected csv or json)");
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json recs = nlohmann::json::array(), aggs = nlohmann::json::array();
  for (const auto& m : r.records) {
    recs.push_back({{"timestamp", m.timestamp},
                    {"variable", m.variable},
                    {"model_tag", m.model_tag},
                    {"rmse", m.rmse},
                    {"ssim", m.ssim}});
  }
  for (const auto& a : r.aggregates) {
    aggs.push_back({{"variable", a.variable},
                    {"model_tag", a.model_tag},
                    {"n", a.n},
                    {"rmse_mean", a.rmse_mean},
                    {"rmse_sigma", a.rmse_sigma},
                    {"ssim_mean", a.ssim_mean},
                    {"ssim_sigma", a.ssim_sigma}});
  }
  return {{"records", recs}, {"aggregates", aggs}, {"metadata", r.metadata}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    for (const auto& m : j.at("records")) {
      r.records.push_back({m.at("timestamp").get<std::string>(), m.at("variable").get<std::string>(),
                           m.at("model_tag").get<std::string>(), m.at("rmse").get<double>(),
                           m.at("ssim").get<double>()});
    }
    for (const auto& a : j.at("aggregates")) {
      r.aggregates.push_back({a.at("variable").get<std::string>(), a.at("model_tag").get<std::string>(),
                              a.at("n").get<std::size_t>(), a.at("rmse_mean").get<double>(),
                              a.at("rmse_sigma").get<double>(), a.at("ssim_mean").get<double>(),
                              a.at("ssim_sigma").get<double>()});
    }
    r.metadata = j.value("metadata", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed metric report: ") + e.what());
  }
}

void emit_report(const MetricReport& report, ReportFormat format, const std::string& path) {
  auto out = open_out(path);
  if (format == ReportFormat::Json) {
    out << to_json(report).dump(2) << '\n';
  } else {
    out << kReportCsvHeader << '\n';
    for (const auto& m : report.records) {
      out << m.timestamp << ',' << m.variable << ',' << m.model_tag << ',' << num(m.rmse) << ',' << num(m.ssim)
          << '\n';
    }
  }
  finish(out, path);
}

void emit_aggregates_csv(const std::vector<AggregateRecord>& aggregates, const std::string& path) {
  auto out = open_out(path);
  out << kAggregateCsvHeader << '\n';
  for (const auto& a : aggregates) {
    out << a.variable << ',' << a.model_tag << ',' << a.n << ',' << num(a.rmse_mean) << ',' << num(a.rmse_sigma)
        << ',' << num(a.ssim_mean) << ',' << num(a.ssim_sigma) << '\n';
  }
  finish(out, path);
}

MetricReport read_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read report '" + path + "'");
  try {
    return metric_report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("report '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace wxe
