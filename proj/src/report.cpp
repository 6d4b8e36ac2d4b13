#include "fedsim/report.hpp"

#include "fedsim/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

namespace fedsim {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ReportPaths write_report(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                         const MetricsReport& rep) {
  std::filesystem::create_directories(dir);
  ReportPaths paths{dir / "summary.json", dir / "rounds.csv", dir / "timing.json"};

  nlohmann::json summary;
  summary["config"] = experiment_to_json(cfg);
  summary["seed"] = cfg.seed;
  summary["metrics"] = nlohmann::json::object();
  for (const auto& [key, value] : rep.final_metrics) summary["metrics"][key] = value;
  summary["per_trial"] = nlohmann::json::object();
  for (const auto& [key, values] : rep.per_trial_finals) summary["per_trial"][key] = values;
  {
    std::ofstream out(paths.summary, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("report: cannot write " + paths.summary.string());
    out << summary.dump(2) << "\n";
  }

  {
    std::ofstream out(paths.rounds, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("report: cannot write " + paths.rounds.string());
    out << "trial,round,metric,value\n";
    for (std::size_t trial = 0; trial < rep.trials.size(); ++trial) {
      for (const RoundRecord& rec : rep.trials[trial].rounds) {
        for (const auto& [key, value] : rec.metrics) {
          out << trial << "," << rec.round << "," << key << "," << format_double(value) << "\n";
        }
      }
    }
  }

  {
    nlohmann::json timing;
    timing["attack_wallclock_mean_s"] = rep.attack_wallclock_mean;
    timing["attack_wallclock_std_s"] = rep.attack_wallclock_std;
    timing["attack_invocations"] = rep.attack_invocations;
    std::ofstream out(paths.timing, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("report: cannot write " + paths.timing.string());
    out << timing.dump(2) << "\n";
  }
  return paths;
}

std::filesystem::path write_sweep_summary(const std::filesystem::path& dir,
                                          const std::vector<SweepCellResult>& cells) {
  std::filesystem::create_directories(dir);
  std::filesystem::path path = dir / "sweep_summary.csv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("report: cannot write " + path.string());

  std::set<std::string> metric_keys;
  for (const SweepCellResult& cell : cells) {
    for (const auto& [key, value] : cell.metrics) {
      (void)value;
      metric_keys.insert(key);
    }
  }

  out << "cell";
  if (!cells.empty()) {
    for (const auto& [field, value] : cells.front().axis_values) {
      (void)value;
      out << "," << field;
    }
  }
  for (const std::string& key : metric_keys) out << "," << key;
  out << "\n";

  for (std::size_t i = 0; i < cells.size(); ++i) {
    out << i;
    for (const auto& [field, value] : cells[i].axis_values) {
      (void)field;
      out << "," << value;
    }
    for (const std::string& key : metric_keys) {
      out << ",";
      auto it = cells[i].metrics.find(key);
      if (it != cells[i].metrics.end()) out << format_double(it->second);
    }
    out << "\n";
  }
  return path;
}

}  // namespace fedsim
