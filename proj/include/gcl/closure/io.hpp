#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gcl/closure/curve.hpp"
#include "gcl/closure/records.hpp"
#include "gcl/core/csv.hpp"

namespace gcl::closure {

inline constexpr const char* kRecordsHeader = "model_id,layer,triple_index,edge_length,s_ac,s_dc,C";
inline constexpr const char* kCurvesHeader = "model_id,layer,edge_length,mean_C,ci_lo,ci_hi,n";

inline void write_records_csv(const std::filesystem::path& path, const std::vector<ClosureRecord>& records) {
  csv::Writer w(path, kRecordsHeader);
  for (const auto& r : records)
    w.row(r.model_id, r.layer, r.triple_index, r.edge_length, r.s_ac, r.s_dc, r.c);
  w.close();
}

inline std::vector<ClosureRecord> read_records_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, kRecordsHeader);
  std::vector<ClosureRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    ClosureRecord r;
    r.model_id = row[0];
    r.layer = row[1];
    r.triple_index = static_cast<std::size_t>(csv::to_long(row[2], t));
    r.edge_length = static_cast<int>(csv::to_long(row[3], t));
    r.s_ac = csv::to_double(row[4], t);
    r.s_dc = csv::to_double(row[5], t);
    r.c = csv::to_double(row[6], t);
    out.push_back(std::move(r));
  }
  return out;
}

/// Undefined intervals are written as empty fields.
inline void write_curves_csv(const std::filesystem::path& path, const std::vector<ClosureCurve>& curves) {
  csv::Writer w(path, kCurvesHeader);
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      const std::string lo = p.ci_defined ? csv::format_double(p.ci_lo) : "";
      const std::string hi = p.ci_defined ? csv::format_double(p.ci_hi) : "";
      w.row(c.model_id, c.layer, p.edge_length, p.mean, lo, hi, p.n);
    }
  w.close();
}

inline std::vector<ClosureCurve> read_curves_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, kCurvesHeader);
  std::vector<ClosureCurve> out;
  for (const auto& row : t.rows) {
    if (out.empty() || out.back().model_id != row[0] || out.back().layer != row[1])
      out.push_back({row[0], row[1], {}});
    CurvePoint p;
    p.edge_length = static_cast<int>(csv::to_long(row[2], t));
    p.mean = csv::to_double(row[3], t);
    p.ci_defined = !row[4].empty() && !row[5].empty();
    p.ci_lo = p.ci_defined ? csv::to_double(row[4], t) : p.mean;
    p.ci_hi = p.ci_defined ? csv::to_double(row[5], t) : p.mean;
    p.n = static_cast<std::size_t>(csv::to_long(row[6], t));
    p.out_of_range = p.mean < -1.0 || p.mean > 1.0;
    out.back().points.push_back(p);
  }
  if (out.empty()) throw IoError(path.string(), "no curve rows");
  return out;
}

}  // namespace gcl::closure
