#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echolm/common.hpp"
#include "echolm/judge.hpp"

namespace echolm {

// One CSV row of the raw per-request log.
struct RequestRecord {
  std::string id;
  double arrival_s = 0.0;
  std::string model_used;  // Small | Large | CacheHit | Error
  std::size_t n_examples = 0;
  double ttft_ms = 0.0;
  double total_ms = 0.0;
  std::optional<double> score;  // pairwise judge score when sampled
};

// Mean simulated milliseconds spent per stage, over all requests.
struct StageBreakdown {
  double lookup_ms = 0.0;
  double retrieve_ms = 0.0;
  double route_ms = 0.0;
  double generate_ms = 0.0;
  double feedback_ms = 0.0;
  double manage_ms = 0.0;
};

struct MetricsReport {
  std::size_t n_requests = 0;
  std::size_t n_judged = 0;
  std::optional<double> win_rate;  // absent when nothing was judged
  double avg_pairwise_score = 0.0;
  double offload_rate = 0.0;
  double cache_hit_rate = 0.0;
  double error_rate = 0.0;
  double throughput_rps = 0.0;
  double ttft_p50_ms = 0.0;
  double ttft_p99_ms = 0.0;
  double total_p50_ms = 0.0;
  double total_p99_ms = 0.0;
  StageBreakdown stage_means;
};

inline MetricsReport compute_metrics(const std::vector<RequestRecord>& records,
                                     double duration_s, double tie_band = 0.3,
                                     StageBreakdown stage_means = {}) {
  MetricsReport r;
  r.n_requests = records.size();
  r.stage_means = stage_means;
  if (records.empty()) return r;

  std::vector<double> scores, ttfts, totals;
  std::size_t small = 0, hits = 0, errors = 0;
  for (const auto& rec : records) {
    if (rec.score) scores.push_back(*rec.score);
    ttfts.push_back(rec.ttft_ms);
    totals.push_back(rec.total_ms);
    if (rec.model_used == "Small") ++small;
    if (rec.model_used == "CacheHit") ++hits;
    if (rec.model_used == "Error") ++errors;
  }
  const auto n = static_cast<double>(records.size());
  r.n_judged = scores.size();
  if (!scores.empty()) {
    r.win_rate = win_rate(scores, tie_band);
    double sum = 0.0;
    for (const double s : scores) sum += s;
    r.avg_pairwise_score = sum / static_cast<double>(scores.size());
  }
  r.offload_rate = static_cast<double>(small) / n;  // strictly small-model traffic
  r.cache_hit_rate = static_cast<double>(hits) / n;
  r.error_rate = static_cast<double>(errors) / n;
  if (duration_s > 0.0) r.throughput_rps = n / duration_s;
  r.ttft_p50_ms = percentile(ttfts, 50.0);
  r.ttft_p99_ms = percentile(ttfts, 99.0);
  r.total_p50_ms = percentile(totals, 50.0);
  r.total_p99_ms = percentile(totals, 99.0);
  return r;
}

inline constexpr const char* kRequestsCsvHeader =
    "id,arrival_s,model_used,n_examples,ttft_ms,total_ms,score";

inline std::string format_request_row(const RequestRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%s,%zu,%.6f,%.6f,", r.id.c_str(), r.arrival_s,
                r.model_used.c_str(), r.n_examples, r.ttft_ms, r.total_ms);
  std::string row(buf);
  if (r.score) {
    std::snprintf(buf, sizeof buf, "%.4f", *r.score);
    row += buf;
  }
  return row;
}

inline void write_requests_csv(const std::filesystem::path& path,
                               const std::vector<RequestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << kRequestsCsvHeader << "\n";
  for (const auto& r : records) out << format_request_row(r) << "\n";
}

inline std::vector<RequestRecord> read_requests_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv " + path.string());
  if (line != kRequestsCsvHeader) throw std::runtime_error("unexpected csv header: " + line);
  std::vector<RequestRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() == 6) cols.push_back("");  // empty trailing score
    if (cols.size() != 7) throw std::runtime_error("bad csv row: " + line);
    RequestRecord r;
    r.id = cols[0];
    r.arrival_s = std::stod(cols[1]);
    r.model_used = cols[2];
    r.n_examples = static_cast<std::size_t>(std::stoull(cols[3]));
    r.ttft_ms = std::stod(cols[4]);
    r.total_ms = std::stod(cols[5]);
    if (!cols[6].empty()) r.score = std::stod(cols[6]);
    records.push_back(std::move(r));
  }
  return records;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["n_requests"] = r.n_requests;
  j["n_judged"] = r.n_judged;
  if (r.win_rate)
    j["win_rate"] = *r.win_rate;
  else
    j["win_rate"] = nullptr;
  j["avg_pairwise_score"] = r.avg_pairwise_score;
  j["offload_rate"] = r.offload_rate;
  j["cache_hit_rate"] = r.cache_hit_rate;
  j["error_rate"] = r.error_rate;
  j["throughput_rps"] = r.throughput_rps;
  j["ttft_p50_ms"] = r.ttft_p50_ms;
  j["ttft_p99_ms"] = r.ttft_p99_ms;
  j["total_p50_ms"] = r.total_p50_ms;
  j["total_p99_ms"] = r.total_p99_ms;
  j["stage_means_ms"] = {{"lookup", r.stage_means.lookup_ms},
                         {"retrieve", r.stage_means.retrieve_ms},
                         {"route", r.stage_means.route_ms},
                         {"generate", r.stage_means.generate_ms},
                         {"feedback", r.stage_means.feedback_ms},
                         {"manage", r.stage_means.manage_ms}};
  return j;
}

inline void emit_report(const MetricsReport& report, const std::vector<RequestRecord>& records,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_requests_csv(out_dir / "requests.csv", records);
  std::ofstream out(out_dir / "summary.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot open summary.json for writing");
  out << report_to_json(report).dump(2) << "\n";
}

}  // namespace echolm
