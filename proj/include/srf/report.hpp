#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "srf/suite.hpp"

namespace srf {

/// Shortest round-trip decimal form; used everywhere a double is printed so
/// that reports are byte-identical across runs.
inline std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_report_csv(std::ostream& out, const SuiteResult& result) {
  out << "inequality,u_id,g_id,s,t,witness_x,witness_y,witness_r,margin,tol,mode,verdict\n";
  for (const auto& row : result.rows) {
    out << row.inequality << ',' << row.u_id << ',' << row.g_id << ',' << g17(row.s) << ','
        << g17(row.t) << ',' << row.x << ',' << row.y << ',' << g17(row.r) << ','
        << g17(row.margin) << ',' << g17(row.tol) << ','
        << (row.informational ? "informational" : "graded") << ','
        << (row.pass ? "pass" : "fail") << '\n';
  }
}

inline nlohmann::json summary_json(const std::string& scenario_name, const SuiteResult& result) {
  nlohmann::json j;
  j["scenario"] = scenario_name;
  nlohmann::json checks = nlohmann::json::object();
  for (const auto& rep : result.reports) {
    checks[rep.id] = {{"margin", rep.margin},
                      {"tol", rep.tol},
                      {"verdict", rep.pass ? "pass" : "fail"},
                      {"mode", rep.informational ? "informational" : "graded"},
                      {"witness",
                       {{"s", rep.witness.s},
                        {"t", rep.witness.t},
                        {"r", rep.witness.r},
                        {"x", rep.witness.x},
                        {"y", rep.witness.y},
                        {"u_id", rep.witness.u_id},
                        {"g_id", rep.witness.g_id}}},
                      {"grid", rep.grid_description}};
  }
  j["checks"] = checks;
  nlohmann::json imps = nlohmann::json::array();
  for (const auto& imp : result.implications)
    imps.push_back({{"name", imp.name},
                    {"premises", imp.premises},
                    {"conclusions", imp.conclusions},
                    {"status", imp.status}});
  j["implications"] = imps;
  return j;
}

}  // namespace srf
