#pragma once

// Report serialization (JSON / CSV) and the throughput-vs-power scatter.

#include <string>
#include <vector>

#include "json.hpp"
#include "sparq/engine.hpp"

namespace sparq {

// Shortest round-trip decimal form; identical bits give identical text.
std::string format_double(double v);

nlohmann::ordered_json to_json(const MemConfig& cfg);
MemConfig mem_config_from_json(const nlohmann::json& j, MemConfig base = {});

// Each config value tagged "paper-derived", "default-config" or "user-config".
nlohmann::ordered_json config_provenance(const MemConfig& cfg);

nlohmann::ordered_json to_json(const RunReport& r);
std::string to_csv(const RunReport& r);

struct ScatterPoint {
  std::string name;
  double gops = 0.0;
  double watts = 0.0;
  double gops_per_watt = 0.0;
};

// Reads name, effective GOp/s and W from a report written by to_json.
ScatterPoint scatter_point_from_report(const nlohmann::json& report);
ScatterPoint make_point(std::string name, double gops, double watts);

// GOp/s on the iso-efficiency diagonal for `tops_per_watt` at `watts`.
double iso_efficiency_gops(double tops_per_watt, double watts) noexcept;
bool on_iso_line(const ScatterPoint& p, double tops_per_watt, double rel_tol = 1e-9) noexcept;

std::string scatter_csv(const std::vector<ScatterPoint>& points);
// Log-log scatter (x: W, y: GOp/s) with labeled points and iso-efficiency
// diagonals at each decade of TOp/s/W that crosses the plot.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title = "Throughput vs power");

}  // namespace sparq
