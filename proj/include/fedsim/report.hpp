#pragma once

#include "fedsim/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fedsim {

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

struct ReportPaths {
  std::filesystem::path summary;  // summary.json: config echo, seed, final metrics
  std::filesystem::path rounds;   // rounds.csv: trial,round,metric,value
  std::filesystem::path timing;   // timing.json: wall-clock stats (not deterministic)
};

/// Writes the report set for one experiment. summary.json and rounds.csv are
/// bit-reproducible for a fixed (config, seed); wall-clock numbers live only
/// in timing.json.
ReportPaths write_report(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                         const MetricsReport& rep);

struct SweepCellResult {
  std::vector<std::pair<std::string, std::string>> axis_values;  // (field, value)
  std::map<std::string, double> metrics;
};

std::filesystem::path write_sweep_summary(const std::filesystem::path& dir,
                                          const std::vector<SweepCellResult>& cells);

}  // namespace fedsim
