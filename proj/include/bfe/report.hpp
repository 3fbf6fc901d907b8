#pragma once

// Verification reports (JSON) and probe time series (CSV).

#include "bfe/core.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>

namespace bfe {

struct ReportEntry {
  std::string suite;
  std::string quantity;
  std::string tag;  // short description of the checked identity or bound
  double expected = 0;
  double actual = 0;
  double slack = 0;  // >= 0 iff the check passes
  bool pass = false;
};

struct Report {
  std::string suite;
  std::vector<ReportEntry> entries;

  bool pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }

  /// Records "actual <= bound" (slack = bound - actual).
  ReportEntry& at_most(const std::string& quantity, const std::string& tag, double actual, double bound) {
    return add(quantity, tag, bound, actual, bound - actual);
  }
  /// Records "actual >= bound" (slack = actual - bound).
  ReportEntry& at_least(const std::string& quantity, const std::string& tag, double actual, double bound) {
    return add(quantity, tag, bound, actual, actual - bound);
  }
  /// Records |actual - expected| <= tol.
  ReportEntry& near(const std::string& quantity, const std::string& tag, double actual, double expected, double tol) {
    return add(quantity, tag, expected, actual, tol - std::abs(actual - expected));
  }

  ReportEntry& add(const std::string& quantity, const std::string& tag, double expected, double actual, double slack) {
    entries.push_back({suite, quantity, tag, expected, actual, slack, std::isfinite(slack) && slack >= 0});
    return entries.back();
  }

  void merge(const Report& other) { entries.insert(entries.end(), other.entries.begin(), other.entries.end()); }
};

inline nlohmann::ordered_json report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["entries"] = nlohmann::ordered_json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  for (const auto& e : r.entries)
    j["entries"].push_back({{"suite", e.suite},
                            {"quantity", e.quantity},
                            {"tag", e.tag},
                            {"expected", num(e.expected)},
                            {"actual", num(e.actual)},
                            {"slack", num(e.slack)},
                            {"pass", e.pass}});
  j["pass"] = r.pass();
  return j;
}

inline void write_report(const Report& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << report_to_json(r).dump(2) << "\n";
  if (!out) throw IoError("write failed for report '" + path + "'");
}

struct TimeSeriesRow {
  double t;
  std::string probe;
  std::string field;
  Complex value;
};

using TimeSeries = std::vector<TimeSeriesRow>;

inline void write_timeseries(std::ostream& out, const TimeSeries& series) {
  out << "t,probe,field,re,im\n" << std::setprecision(12);
  for (const auto& r : series)
    out << r.t << ',' << r.probe << ',' << r.field << ',' << r.value.real() << ',' << r.value.imag() << "\n";
}

inline void write_timeseries(const TimeSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write time series '" + path + "'");
  write_timeseries(out, series);
  if (!out) throw IoError("write failed for time series '" + path + "'");
}

}  // namespace bfe
