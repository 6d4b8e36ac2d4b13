#include "fedsim/cli.hpp"
#include "fedsim/config.hpp"
#include "fedsim/report.hpp"

#include <doctest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fedsim;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_json(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& body) {
  auto path = dir / name;
  std::ofstream out(path);
  out << body;
  return path;
}

const char* kMinimalConfig = R"({
  "seed": 21,
  "clients": 5,
  "rounds": 2,
  "model": {"kind": "mlp", "input_dim": 3, "num_classes": 3, "hidden_dim": 4},
  "data": {"n_train": 100, "n_test": 50}
})";

}  // namespace

TEST_CASE("parse_config fills defaults for a minimal config") {
  auto dir = temp_dir("fedsim_cli_minimal");
  auto path = write_json(dir, "cfg.json", kMinimalConfig);
  ParsedConfig parsed = parse_config(path.string());
  REQUIRE(std::holds_alternative<ExperimentConfig>(parsed));
  const ExperimentConfig& cfg = std::get<ExperimentConfig>(parsed);
  CHECK(cfg.seed == 21);
  CHECK(cfg.trials == 1);
  CHECK(cfg.compromised == 0);
  CHECK(cfg.aggregation.kind == RuleKind::kMean);
  CHECK(cfg.train.domain.lo == -10.0);
  CHECK(cfg.train.domain.hi == 10.0);

  // the resolved echo parses back to the identical experiment
  nlohmann::json echo = experiment_to_json(cfg);
  ExperimentConfig back = experiment_from_json(echo);
  CHECK(experiment_to_json(back) == echo);
}

TEST_CASE("parse_config rejects invariant violations naming both fields") {
  auto dir = temp_dir("fedsim_cli_invalid");
  auto path = write_json(dir, "cfg.json", R"({
    "clients": 4, "compromised": 7,
    "model": {"kind": "linear-svm", "input_dim": 2}
  })");
  try {
    parse_config(path.string());
    FAIL("expected a validation error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("compromised") != std::string::npos);
    CHECK(msg.find("clients") != std::string::npos);
  }
}

TEST_CASE("parse_config rejects unknown keys instead of ignoring them") {
  auto dir = temp_dir("fedsim_cli_unknown");
  auto path = write_json(dir, "cfg.json", R"({
    "clients": 5,
    "agregation": {"rule": "mean"},
    "model": {"kind": "linear-svm", "input_dim": 2}
  })");
  CHECK_THROWS_WITH_AS(parse_config(path.string()), doctest::Contains("agregation"),
                       std::invalid_argument);
}

TEST_CASE("explicit label maps parse, validate, and round-trip") {
  auto dir = temp_dir("fedsim_cli_labelmap");
  auto path = write_json(dir, "cfg.json", R"({
    "clients": 5, "compromised": 1, "rounds": 1,
    "model": {"kind": "mlp", "input_dim": 3, "num_classes": 3, "hidden_dim": 4},
    "data": {"n_train": 60, "n_test": 30},
    "attack": {"kind": "label-flip", "knowledge": "partial", "label_map": [1, 2, 0]}
  })");
  ExperimentConfig cfg = std::get<ExperimentConfig>(parse_config(path.string()));
  REQUIRE(cfg.attack.label_map.has_value());
  CHECK(*cfg.attack.label_map == std::vector<int>{1, 2, 0});
  nlohmann::json echo = experiment_to_json(cfg);
  CHECK(experiment_from_json(echo).attack.label_map == cfg.attack.label_map);

  auto bad = write_json(dir, "bad.json", R"({
    "clients": 5, "compromised": 1, "rounds": 1,
    "model": {"kind": "mlp", "input_dim": 3, "num_classes": 3, "hidden_dim": 4},
    "attack": {"kind": "label-flip", "label_map": [1, 7, 0]}
  })");
  CHECK_THROWS_WITH_AS(parse_config(bad.string()), doctest::Contains("label_map"),
                       std::invalid_argument);
}

TEST_CASE("sweep configs expand to validated cells") {
  auto dir = temp_dir("fedsim_cli_sweep_parse");
  auto path = write_json(dir, "cfg.json", R"({
    "seed": 4, "clients": 6, "rounds": 1,
    "model": {"kind": "mlp", "input_dim": 3, "num_classes": 3, "hidden_dim": 4},
    "data": {"n_train": 90, "n_test": 30},
    "sweep": {"field": "compromised", "values": [0, 1, 2]}
  })");
  ParsedConfig parsed = parse_config(path.string());
  REQUIRE(std::holds_alternative<SweepSpec>(parsed));
  const SweepSpec& spec = std::get<SweepSpec>(parsed);
  CHECK(spec.num_cells() == 3);
  CHECK(sweep_cell(spec, {2}).compromised == 2);
  // assumed_m follows the swept compromised count by default
  CHECK(sweep_cell(spec, {2}).aggregation.assumed_m == 2);

  auto bad = write_json(dir, "bad.json", R"({
    "clients": 6,
    "model": {"kind": "linear-svm", "input_dim": 2},
    "sweep": {"field": "nonsense", "values": [1]}
  })");
  CHECK_THROWS_WITH_AS(parse_config(bad.string()), doctest::Contains("nonsense"),
                       std::invalid_argument);
}

TEST_CASE("format_double round-trips bit-exactly") {
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.uniform(-12.0, 12.0));
    std::string s = format_double(v);
    double back = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(res.ec == std::errc());
    CHECK(back == v);
  }
}

TEST_CASE("run subcommand writes a report set and exits zero") {
  auto dir = temp_dir("fedsim_cli_run");
  auto cfg_path = write_json(dir, "cfg.json", kMinimalConfig);
  auto out_dir = dir / "out";
  int code = run_cli({"run", cfg_path.string(), "--out", out_dir.string()});
  CHECK(code == 0);
  CHECK(std::filesystem::exists(out_dir / "summary.json"));
  CHECK(std::filesystem::exists(out_dir / "rounds.csv"));
  CHECK(std::filesystem::exists(out_dir / "timing.json"));

  // reproducibility header: the emitted summary embeds the resolved config + seed
  std::ifstream in(out_dir / "summary.json");
  nlohmann::json summary = nlohmann::json::parse(in);
  CHECK(summary.at("seed").get<std::uint64_t>() == 21);
  CHECK(summary.at("config").at("clients").get<int>() == 5);

  // report numbers round-trip bit-exactly through the files
  ExperimentConfig cfg = std::get<ExperimentConfig>(parse_config(cfg_path.string()));
  MetricsReport rep = run_experiment(cfg);
  for (const auto& [key, value] : rep.final_metrics) {
    double stored = summary.at("metrics").at(key).get<double>();
    CHECK(stored == value);
  }

  std::ifstream csv(out_dir / "rounds.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "trial,round,metric,value");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    auto last_comma = line.rfind(',');
    std::string value = line.substr(last_comma + 1);
    double parsed_value = 0.0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), parsed_value);
    CHECK(res.ec == std::errc());
  }
  CHECK(rows > 0);
}

TEST_CASE("run twice with one seed produces byte-identical deterministic files") {
  auto dir = temp_dir("fedsim_cli_deterministic");
  auto cfg_path = write_json(dir, "cfg.json", kMinimalConfig);
  auto out1 = dir / "a", out2 = dir / "b";
  CHECK(run_cli({"run", cfg_path.string(), "--out", out1.string()}) == 0);
  CHECK(run_cli({"run", cfg_path.string(), "--out", out2.string()}) == 0);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(out1 / "summary.json") == slurp(out2 / "summary.json"));
  CHECK(slurp(out1 / "rounds.csv") == slurp(out2 / "rounds.csv"));
}

TEST_CASE("sweep subcommand writes one row per value") {
  auto dir = temp_dir("fedsim_cli_sweep");
  auto cfg_path = write_json(dir, "cfg.json", R"({
    "seed": 4, "clients": 6, "rounds": 1,
    "model": {"kind": "mlp", "input_dim": 3, "num_classes": 3, "hidden_dim": 4},
    "data": {"n_train": 90, "n_test": 30},
    "sweep": {"field": "compromised", "values": [0, 1, 2]}
  })");
  auto out_dir = dir / "out";
  int code = run_cli({"sweep", cfg_path.string(), "--out", out_dir.string(), "--threads", "2"});
  CHECK(code == 0);
  std::ifstream in(out_dir / "sweep_summary.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 4);  // header + one row per swept value
  CHECK(std::filesystem::exists(out_dir / "cell_0" / "summary.json"));
  CHECK(std::filesystem::exists(out_dir / "cell_2" / "summary.json"));
}

TEST_CASE("oracle subcommand prints MATCH lines and exits zero") {
  auto dir = temp_dir("fedsim_cli_oracle");
  auto cfg_path = write_json(dir, "oracle.json", R"({
    "seed": 12, "instances": 25, "max_clients": 8, "max_dim": 5
  })");
  CHECK(run_cli({"oracle", cfg_path.string()}) == 0);
}

TEST_CASE("missing files and bad subcommands fail nonzero") {
  CHECK(run_cli({"run", "/nonexistent/config.json"}) != 0);
  CHECK(run_cli({}) != 0);
}

TEST_CASE("shipped example configs run end to end") {
  const std::string configs = FEDSIM_CONFIG_DIR;
  auto out = temp_dir("fedsim_cli_shipped");

  CHECK(run_cli({"run", configs + "/run_krum_attack.json", "--out",
                 (out / "krum").string()}) == 0);
  CHECK(std::filesystem::exists(out / "krum" / "summary.json"));

  CHECK(run_cli({"run", configs + "/run_regression_mean.json", "--out",
                 (out / "mean").string(), "--trials", "1"}) == 0);

  CHECK(run_cli({"sweep", configs + "/sweep_compromised.json", "--out",
                 (out / "sweep").string(), "--threads", "3"}) == 0);
  std::ifstream in(out / "sweep" / "sweep_summary.csv");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 7);  // header + one row per swept compromised count

  CHECK(run_cli({"oracle", configs + "/oracle.json"}) == 0);
}
