#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "mfsgd/common.hpp"

namespace mfsgd {

// One measurement row. Aggregate rows carry seed = 0 and status "aggregate"
// (value = mean, stderr = standard error); failed trials carry
// metric = "divergence" with the step index in value.
struct TrialRow {
  std::string study;
  long N = 0;
  uint64_t seed = 0;
  double t = 0.0;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  std::string status = "ok";
};

inline constexpr const char* kCsvHeader = "study,N,seed,t,metric,value,stderr,status";

inline void sort_rows(std::vector<TrialRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const TrialRow& a, const TrialRow& b) {
    return std::tie(a.study, a.N, a.seed, a.t, a.metric) <
           std::tie(b.study, b.N, b.seed, b.t, b.metric);
  });
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Rows are sorted by (N, seed, t, metric) before writing, so the bytes depend
// only on the row multiset; reruns of the same plan are byte-identical.
inline std::string format_csv(std::vector<TrialRow> rows) {
  sort_rows(rows);
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.study;
    out += ',';
    out += std::to_string(r.N);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += fmt17(r.t);
    out += ',';
    out += r.metric;
    out += ',';
    out += fmt17(r.value);
    out += ',';
    out += fmt17(r.stderr_);
    out += ',';
    out += r.status;
    out += '\n';
  }
  return out;
}

// Refuses to write an empty record set (no file is created in that case).
inline void emit_csv(const std::vector<TrialRow>& rows, const std::filesystem::path& path) {
  if (rows.empty())
    throw std::invalid_argument("emit_csv: no records to write, refusing to create " +
                                path.string());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);  // LF line endings on every platform
  if (!f) throw std::runtime_error("emit_csv: cannot open " + path.string());
  f << format_csv(rows);
}

}  // namespace mfsgd
