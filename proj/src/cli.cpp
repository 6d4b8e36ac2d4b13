#include "fedsim/cli.hpp"

#include "fedsim/config.hpp"
#include "fedsim/oracle.hpp"
#include "fedsim/report.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace fedsim {
namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
};

void apply_overrides(ExperimentConfig& cfg, const CommonOpts& opts) {
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.trials) cfg.trials = *opts.trials;
  validate_experiment(cfg);
}

int cmd_run(const CommonOpts& opts) {
  ParsedConfig parsed = parse_config(opts.config_path);
  if (std::holds_alternative<SweepSpec>(parsed)) {
    std::cerr << "error: " << opts.config_path
              << " contains a sweep section; use the `sweep` subcommand\n";
    return 1;
  }
  ExperimentConfig cfg = std::get<ExperimentConfig>(parsed);
  apply_overrides(cfg, opts);

  MetricsReport rep = run_experiment(cfg);
  ReportPaths paths = write_report(opts.out_dir, cfg, rep);
  std::cout << "wrote " << paths.summary.string() << "\n";
  for (const auto& [key, value] : rep.final_metrics) {
    std::cout << "  " << key << " = " << format_double(value) << "\n";
  }
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  ParsedConfig parsed = parse_config(opts.config_path);
  if (!std::holds_alternative<SweepSpec>(parsed)) {
    std::cerr << "error: " << opts.config_path << " has no sweep section\n";
    return 1;
  }
  const SweepSpec& spec = std::get<SweepSpec>(parsed);
  const std::size_t cells = spec.num_cells();

  std::vector<ExperimentConfig> configs(cells);
  std::vector<std::vector<std::size_t>> indices(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<std::size_t> at(spec.axes.size());
    std::size_t rest = cell;
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      at[a] = rest % spec.axes[a].values.size();
      rest /= spec.axes[a].values.size();
    }
    indices[cell] = at;
    configs[cell] = sweep_cell(spec, at);
    apply_overrides(configs[cell], opts);
  }

  std::vector<MetricsReport> reports(cells);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(cells)));

  auto worker = [&] {
    for (;;) {
      std::size_t cell = next.fetch_add(1);
      if (cell >= cells) return;
      try {
        reports[cell] = run_experiment(configs[cell]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (!first_error.empty()) {
    std::cerr << "error: " << first_error << "\n";
    return 1;
  }

  // single collector writes everything in cell order
  std::vector<SweepCellResult> rows(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::filesystem::path cell_dir =
        std::filesystem::path(opts.out_dir) / ("cell_" + std::to_string(cell));
    write_report(cell_dir, configs[cell], reports[cell]);
    SweepCellResult row;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const nlohmann::json& v = spec.axes[a].values[indices[cell][a]];
      row.axis_values.emplace_back(spec.axes[a].field,
                                   v.is_string() ? v.get<std::string>() : v.dump());
    }
    row.metrics = reports[cell].final_metrics;
    rows[cell] = std::move(row);
  }
  std::filesystem::path summary = write_sweep_summary(opts.out_dir, rows);
  std::cout << "wrote " << summary.string() << " (" << cells << " cells)\n";
  return 0;
}

struct OracleOpts {
  std::uint64_t seed = 7;
  int instances = 100;
  int max_clients = 8;
  int max_dim = 5;
};

OracleOpts parse_oracle_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  OracleOpts opts;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "seed") opts.seed = it.value().get<std::uint64_t>();
    else if (it.key() == "instances") opts.instances = it.value().get<int>();
    else if (it.key() == "max_clients") opts.max_clients = it.value().get<int>();
    else if (it.key() == "max_dim") opts.max_dim = it.value().get<int>();
    else throw std::invalid_argument("config: oracle: unknown key \"" + it.key() + "\"");
  }
  if (opts.instances < 1 || opts.max_clients < 4 || opts.max_clients > 8 || opts.max_dim < 1) {
    throw std::invalid_argument("config: oracle: need instances >= 1, 4 <= max_clients <= 8, max_dim >= 1");
  }
  return opts;
}

int cmd_oracle(const CommonOpts& common) {
  OracleOpts opts = parse_oracle_config(common.config_path);
  if (common.seed) opts.seed = *common.seed;
  Rng rng(opts.seed);
  int mismatches = 0;

  for (int i = 0; i < opts.instances; ++i) {
    const int u_count = 4 + static_cast<int>(rng.uniform_index(
                                static_cast<std::size_t>(opts.max_clients - 3)));
    const auto dim = static_cast<Eigen::Index>(
        1 + rng.uniform_index(static_cast<std::size_t>(opts.max_dim)));
    std::vector<ClientUpdate> updates;
    for (int c = 0; c < u_count; ++c) {
      updates.push_back({c, rng.normal_vector(dim, 1.0), 1.0 / u_count});
    }
    const int max_m = u_count - 3;
    const int m = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_m + 1)));

    // krum selection vs brute force
    auto krum = aggregate_krum(updates, m);
    int expected = oracle::krum_select(updates, m);
    bool ok = krum.selected_id && *krum.selected_id == expected;

    // trimmed mean vs sort-based oracle
    const int k = static_cast<int>(rng.uniform_index(static_cast<std::size_t>((u_count - 1) / 2 + 1)));
    auto trimmed = aggregate_trimmed_mean(updates, k);
    ok = ok && (trimmed.global - oracle::trimmed_mean(updates, k)).norm() == 0.0;

    // minimum benign score vs exhaustive subsets (tolerance covers summation order)
    double e_fast = min_benign_score(updates, m);
    double e_slow = oracle::min_benign_score_exhaustive(updates);
    ok = ok && std::abs(e_fast - e_slow) <= 1e-12 * (1.0 + std::abs(e_slow));

    if (ok) {
      std::cout << "MATCH instance " << i << " (U=" << u_count << ", dim=" << dim
                << ", m=" << m << ", k=" << k << ")\n";
    } else {
      std::cout << "MISMATCH instance " << i << " (U=" << u_count << ", dim=" << dim
                << ", m=" << m << ", k=" << k << ")\n";
      ++mismatches;
    }
  }
  if (mismatches > 0) {
    std::cerr << "error: " << mismatches << " oracle mismatches\n";
    return 1;
  }
  std::cout << "all " << opts.instances << " instances match\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"federated aggregation poisoning simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&](CLI::App* cmd, bool with_threads) {
    cmd->add_option("config", opts.config_path, "JSON config path")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (default: out)");
    cmd->add_option("--seed", [&opts](const CLI::results_t& r) {
      opts.seed = std::stoull(r.at(0));
      return true;
    }, "seed override");
    cmd->add_option("--trials", [&opts](const CLI::results_t& r) {
      opts.trials = std::stoi(r.at(0));
      return true;
    }, "trials override");
    if (with_threads) {
      cmd->add_option("--threads", opts.threads, "sweep worker threads (default: 1)");
    }
  };

  CLI::App* run = app.add_subcommand("run", "run a single experiment");
  add_common(run, /*with_threads=*/false);
  CLI::App* sweep = app.add_subcommand("sweep", "run the config's sweep grid");
  add_common(sweep, /*with_threads=*/true);
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "brute-force cross-checks");
  oracle_cmd->add_option("config", opts.config_path, "JSON config path")->required();
  oracle_cmd->add_option("--seed", [&opts](const CLI::results_t& r) {
    opts.seed = std::stoull(r.at(0));
    return true;
  }, "seed override");

  std::vector<std::string> argv_storage = args;
  std::vector<const char*> argv;
  argv.push_back("fedsim");
  for (const std::string& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) return cmd_run(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (oracle_cmd->parsed()) return cmd_oracle(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace fedsim
