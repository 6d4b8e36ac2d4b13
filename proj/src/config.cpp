#include "fedsim/config.hpp"

#include <fstream>
#include <map>

namespace fedsim {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::invalid_argument("config: " + path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) { known = true; break; }
    }
    if (!known) fail(path, "unknown key \"" + it.key() + "\"");
  }
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const std::string& path, const char* key,
                     std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

template <typename Enum>
Enum parse_enum(const json& obj, const std::string& path, const char* key,
                const std::vector<std::pair<std::string, Enum>>& table, Enum fallback) {
  if (!obj.contains(key)) return fallback;
  std::string s = get_string(obj, path, key, "");
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  std::string valid;
  for (const auto& [name, value] : table) {
    (void)value;
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  fail(path + "/" + key, "unknown value \"" + s + "\" (valid: " + valid + ")");
}

const std::vector<std::pair<std::string, ModelKind>>& model_kinds() {
  static const std::vector<std::pair<std::string, ModelKind>> table = {
      {"linear-regression", ModelKind::kLinearRegression},
      {"linear-svm", ModelKind::kLinearSvm},
      {"mlp", ModelKind::kMlp},
  };
  return table;
}

const std::vector<std::pair<std::string, RuleKind>>& rule_kinds() {
  static const std::vector<std::pair<std::string, RuleKind>> table = {
      {"mean", RuleKind::kMean},
      {"krum", RuleKind::kKrum},
      {"trimmed-mean", RuleKind::kTrimmedMean},
  };
  return table;
}

const std::vector<std::pair<std::string, AttackKind>>& attack_kinds() {
  static const std::vector<std::pair<std::string, AttackKind>> table = {
      {"none", AttackKind::kNone},
      {"gaussian", AttackKind::kGaussian},
      {"label-flip", AttackKind::kLabelFlip},
      {"mean-exact", AttackKind::kMeanExact},
      {"mean-estimated", AttackKind::kMeanEstimated},
      {"krum-descent", AttackKind::kKrumDescent},
      {"krum-kkt", AttackKind::kKrumKkt},
      {"blind", AttackKind::kBlind},
  };
  return table;
}

const std::vector<std::pair<std::string, DataSource>>& data_sources() {
  static const std::vector<std::pair<std::string, DataSource>> table = {
      {"classification", DataSource::kClassification},
      {"regression", DataSource::kRegression},
      {"idx", DataSource::kIdx},
      {"csv", DataSource::kCsv},
  };
  return table;
}

const std::vector<std::pair<std::string, KnowledgeLevel>>& knowledge_levels() {
  static const std::vector<std::pair<std::string, KnowledgeLevel>> table = {
      {"full", KnowledgeLevel::kFull},
      {"partial", KnowledgeLevel::kPartial},
      {"none", KnowledgeLevel::kNone},
  };
  return table;
}

const std::vector<std::pair<std::string, AttackObjective>>& objectives() {
  static const std::vector<std::pair<std::string, AttackObjective>> table = {
      {"targeted", AttackObjective::kTargeted},
      {"untargeted", AttackObjective::kUntargeted},
  };
  return table;
}

const std::vector<std::pair<std::string, MeanEstimator>>& estimators() {
  static const std::vector<std::pair<std::string, MeanEstimator>> table = {
      {"consistent", MeanEstimator::kConsistent},
      {"overshoot", MeanEstimator::kOvershoot},
  };
  return table;
}

const std::vector<std::pair<std::string, AlphaMethod>>& alpha_methods() {
  static const std::vector<std::pair<std::string, AlphaMethod>> table = {
      {"greedy", AlphaMethod::kGreedy},
      {"exhaustive", AlphaMethod::kExhaustive},
      {"restarts", AlphaMethod::kRestarts},
  };
  return table;
}

template <typename Enum>
std::string enum_name(Enum value, const std::vector<std::pair<std::string, Enum>>& table) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "unknown";
}

const std::map<std::string, std::string>& axis_pointers() {
  static const std::map<std::string, std::string> table = {
      {"clients", "/clients"},
      {"compromised", "/compromised"},
      {"rounds", "/rounds"},
      {"noniid_p", "/noniid_p"},
      {"trials", "/trials"},
      {"seed", "/seed"},
      {"lr", "/train/lr"},
      {"epochs", "/train/epochs"},
      {"batch", "/train/batch"},
      {"n_train", "/data/n_train"},
      {"separation", "/data/separation"},
      {"noise_sigma", "/data/noise_sigma"},
      {"rule", "/aggregation/rule"},
      {"assumed_m", "/aggregation/assumed_m"},
      {"trim_k", "/aggregation/trim_k"},
      {"attack_kind", "/attack/kind"},
      {"knowledge", "/attack/knowledge"},
      {"gaussian_sigma", "/attack/gaussian_sigma"},
      {"target_epochs", "/attack/target_epochs"},
      {"target_fill", "/attack/target_fill"},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& sweepable_fields() {
  static const std::vector<std::string> fields = [] {
    std::vector<std::string> out;
    for (const auto& [name, ptr] : axis_pointers()) {
      (void)ptr;
      out.push_back(name);
    }
    return out;
  }();
  return fields;
}

ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j, "", {"seed", "trials", "clients", "compromised", "rounds", "noniid_p",
                     "domain", "model", "data", "train", "aggregation", "attack"});
  ExperimentConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(get_int(j, "", "seed", 1));
  cfg.trials = static_cast<int>(get_int(j, "", "trials", 1));
  cfg.clients = static_cast<int>(get_int(j, "", "clients", 10));
  cfg.compromised = static_cast<int>(get_int(j, "", "compromised", 0));
  cfg.rounds = static_cast<int>(get_int(j, "", "rounds", 10));
  cfg.noniid_p = get_number(j, "", "noniid_p", 0.0);

  if (j.contains("domain")) {
    const json& d = j.at("domain");
    check_keys(d, "/domain", {"lo", "hi"});
    cfg.train.domain.lo = get_number(d, "/domain", "lo", -10.0);
    cfg.train.domain.hi = get_number(d, "/domain", "hi", 10.0);
  }

  if (!j.contains("model")) fail("", "missing required key \"model\"");
  {
    const json& m = j.at("model");
    check_keys(m, "/model", {"kind", "input_dim", "num_classes", "hidden_dim"});
    cfg.model.kind = parse_enum(m, "/model", "kind", model_kinds(), ModelKind::kLinearRegression);
    cfg.model.input_dim = static_cast<int>(get_int(m, "/model", "input_dim", 1));
    int default_classes = cfg.model.kind == ModelKind::kLinearRegression ? 1
                          : cfg.model.kind == ModelKind::kLinearSvm     ? 2
                                                                        : 3;
    cfg.model.num_classes =
        static_cast<int>(get_int(m, "/model", "num_classes", default_classes));
    cfg.model.hidden_dim = static_cast<int>(get_int(m, "/model", "hidden_dim", 0));
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "/data", {"source", "n_train", "n_test", "separation", "noise_sigma",
                            "images", "labels", "test_images", "test_labels", "csv_train",
                            "csv_test"});
    DataSource default_source = cfg.model.kind == ModelKind::kLinearRegression
                                    ? DataSource::kRegression
                                    : DataSource::kClassification;
    cfg.data.source = parse_enum(d, "/data", "source", data_sources(), default_source);
    cfg.data.n_train = get_int(d, "/data", "n_train", 400);
    cfg.data.n_test = get_int(d, "/data", "n_test", 200);
    cfg.data.separation = get_number(d, "/data", "separation", 6.0);
    cfg.data.noise_sigma = get_number(d, "/data", "noise_sigma", 0.05);
    cfg.data.images = get_string(d, "/data", "images", "");
    cfg.data.labels = get_string(d, "/data", "labels", "");
    cfg.data.test_images = get_string(d, "/data", "test_images", "");
    cfg.data.test_labels = get_string(d, "/data", "test_labels", "");
    cfg.data.csv_train = get_string(d, "/data", "csv_train", "");
    cfg.data.csv_test = get_string(d, "/data", "csv_test", "");
  } else if (cfg.model.kind == ModelKind::kLinearRegression) {
    cfg.data.source = DataSource::kRegression;
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "/train", {"epochs", "lr", "batch"});
    cfg.train.epochs = static_cast<int>(get_int(t, "/train", "epochs", 1));
    cfg.train.lr = get_number(t, "/train", "lr", 0.1);
    cfg.train.batch = static_cast<int>(get_int(t, "/train", "batch", 32));
  }

  {
    // assumed_m and trim_k default to the true compromised count
    const json agg = j.contains("aggregation") ? j.at("aggregation") : json::object();
    check_keys(agg, "/aggregation", {"rule", "assumed_m", "trim_k"});
    cfg.aggregation.kind = parse_enum(agg, "/aggregation", "rule", rule_kinds(), RuleKind::kMean);
    cfg.aggregation.assumed_m =
        static_cast<int>(get_int(agg, "/aggregation", "assumed_m", cfg.compromised));
    cfg.aggregation.trim_k =
        static_cast<int>(get_int(agg, "/aggregation", "trim_k", cfg.compromised));
  }

  if (j.contains("attack")) {
    const json& a = j.at("attack");
    check_keys(a, "/attack", {"kind", "knowledge", "objective", "estimator", "alpha_method",
                              "gaussian_sigma", "target_epochs", "target_fill", "label_map",
                              "hyper", "blind"});
    cfg.attack.kind = parse_enum(a, "/attack", "kind", attack_kinds(), AttackKind::kNone);
    KnowledgeLevel default_knowledge = cfg.attack.kind == AttackKind::kMeanExact
                                           ? KnowledgeLevel::kFull
                                       : cfg.attack.kind == AttackKind::kBlind
                                           ? KnowledgeLevel::kNone
                                           : KnowledgeLevel::kPartial;
    cfg.attack.knowledge =
        parse_enum(a, "/attack", "knowledge", knowledge_levels(), default_knowledge);
    cfg.attack.objective =
        parse_enum(a, "/attack", "objective", objectives(), AttackObjective::kTargeted);
    cfg.attack.estimator =
        parse_enum(a, "/attack", "estimator", estimators(), MeanEstimator::kConsistent);
    cfg.attack.alpha_method =
        parse_enum(a, "/attack", "alpha_method", alpha_methods(), AlphaMethod::kGreedy);
    cfg.attack.gaussian_sigma = get_number(a, "/attack", "gaussian_sigma", 10.0);
    cfg.attack.target_epochs = static_cast<int>(get_int(a, "/attack", "target_epochs", 3));
    cfg.attack.target_fill = get_number(a, "/attack", "target_fill", 8.0);
    if (a.contains("label_map")) {
      const json& lm = a.at("label_map");
      if (!lm.is_array()) fail("/attack/label_map", "expected an array of class ids");
      std::vector<int> map;
      for (const json& v : lm) {
        if (!v.is_number_integer()) fail("/attack/label_map", "entries must be integers");
        map.push_back(v.get<int>());
      }
      cfg.attack.label_map = std::move(map);
    }
    if (a.contains("hyper")) {
      const json& h = a.at("hyper");
      check_keys(h, "/attack/hyper", {"eta0", "decay", "sigma", "eps", "varsigma",
                                      "max_iters", "kkt_tol", "restarts"});
      cfg.attack.hyper.eta0 = get_number(h, "/attack/hyper", "eta0", cfg.attack.hyper.eta0);
      cfg.attack.hyper.decay = get_number(h, "/attack/hyper", "decay", cfg.attack.hyper.decay);
      cfg.attack.hyper.sigma = get_number(h, "/attack/hyper", "sigma", cfg.attack.hyper.sigma);
      cfg.attack.hyper.eps = get_number(h, "/attack/hyper", "eps", cfg.attack.hyper.eps);
      cfg.attack.hyper.varsigma =
          get_number(h, "/attack/hyper", "varsigma", cfg.attack.hyper.varsigma);
      cfg.attack.hyper.max_iters =
          static_cast<int>(get_int(h, "/attack/hyper", "max_iters", cfg.attack.hyper.max_iters));
      cfg.attack.hyper.kkt_tol =
          get_number(h, "/attack/hyper", "kkt_tol", cfg.attack.hyper.kkt_tol);
      cfg.attack.hyper.restarts =
          static_cast<int>(get_int(h, "/attack/hyper", "restarts", cfg.attack.hyper.restarts));
    }
    if (a.contains("blind")) {
      const json& b = a.at("blind");
      check_keys(b, "/attack/blind", {"eta0", "growth", "xi", "eta_min", "eta_max", "sigma",
                                      "eps"});
      cfg.attack.blind.eta0 = get_number(b, "/attack/blind", "eta0", cfg.attack.blind.eta0);
      cfg.attack.blind.growth = get_number(b, "/attack/blind", "growth", cfg.attack.blind.growth);
      cfg.attack.blind.xi = get_number(b, "/attack/blind", "xi", cfg.attack.blind.xi);
      cfg.attack.blind.eta_min =
          get_number(b, "/attack/blind", "eta_min", cfg.attack.blind.eta_min);
      cfg.attack.blind.eta_max =
          get_number(b, "/attack/blind", "eta_max", cfg.attack.blind.eta_max);
      cfg.attack.blind.sigma = get_number(b, "/attack/blind", "sigma", cfg.attack.blind.sigma);
      cfg.attack.blind.eps = get_number(b, "/attack/blind", "eps", cfg.attack.blind.eps);
    }
  }

  validate_experiment(cfg);
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["trials"] = cfg.trials;
  j["clients"] = cfg.clients;
  j["compromised"] = cfg.compromised;
  j["rounds"] = cfg.rounds;
  j["noniid_p"] = cfg.noniid_p;
  j["domain"] = {{"lo", cfg.train.domain.lo}, {"hi", cfg.train.domain.hi}};
  j["model"] = {{"kind", enum_name(cfg.model.kind, model_kinds())},
                {"input_dim", cfg.model.input_dim},
                {"num_classes", cfg.model.num_classes},
                {"hidden_dim", cfg.model.hidden_dim}};
  j["data"] = {{"source", enum_name(cfg.data.source, data_sources())},
               {"n_train", cfg.data.n_train},
               {"n_test", cfg.data.n_test},
               {"separation", cfg.data.separation},
               {"noise_sigma", cfg.data.noise_sigma}};
  if (!cfg.data.images.empty()) j["data"]["images"] = cfg.data.images;
  if (!cfg.data.labels.empty()) j["data"]["labels"] = cfg.data.labels;
  if (!cfg.data.test_images.empty()) j["data"]["test_images"] = cfg.data.test_images;
  if (!cfg.data.test_labels.empty()) j["data"]["test_labels"] = cfg.data.test_labels;
  if (!cfg.data.csv_train.empty()) j["data"]["csv_train"] = cfg.data.csv_train;
  if (!cfg.data.csv_test.empty()) j["data"]["csv_test"] = cfg.data.csv_test;
  j["train"] = {{"epochs", cfg.train.epochs}, {"lr", cfg.train.lr}, {"batch", cfg.train.batch}};
  j["aggregation"] = {{"rule", enum_name(cfg.aggregation.kind, rule_kinds())},
                      {"assumed_m", cfg.aggregation.assumed_m},
                      {"trim_k", cfg.aggregation.trim_k}};
  j["attack"] = {{"kind", enum_name(cfg.attack.kind, attack_kinds())},
                 {"knowledge", enum_name(cfg.attack.knowledge, knowledge_levels())},
                 {"objective", enum_name(cfg.attack.objective, objectives())},
                 {"estimator", enum_name(cfg.attack.estimator, estimators())},
                 {"alpha_method", enum_name(cfg.attack.alpha_method, alpha_methods())},
                 {"gaussian_sigma", cfg.attack.gaussian_sigma},
                 {"target_epochs", cfg.attack.target_epochs},
                 {"target_fill", cfg.attack.target_fill},
                 {"hyper",
                  {{"eta0", cfg.attack.hyper.eta0},
                   {"decay", cfg.attack.hyper.decay},
                   {"sigma", cfg.attack.hyper.sigma},
                   {"eps", cfg.attack.hyper.eps},
                   {"varsigma", cfg.attack.hyper.varsigma},
                   {"max_iters", cfg.attack.hyper.max_iters},
                   {"kkt_tol", cfg.attack.hyper.kkt_tol},
                   {"restarts", cfg.attack.hyper.restarts}}},
                 {"blind",
                  {{"eta0", cfg.attack.blind.eta0},
                   {"growth", cfg.attack.blind.growth},
                   {"xi", cfg.attack.blind.xi},
                   {"eta_min", cfg.attack.blind.eta_min},
                   {"eta_max", cfg.attack.blind.eta_max},
                   {"sigma", cfg.attack.blind.sigma},
                   {"eps", cfg.attack.blind.eps}}}};
  if (cfg.attack.label_map) j["attack"]["label_map"] = *cfg.attack.label_map;
  return j;
}

std::size_t SweepSpec::num_cells() const {
  std::size_t n = 1;
  for (const SweepAxis& axis : axes) n *= axis.values.size();
  return n;
}

ExperimentConfig sweep_cell(const SweepSpec& spec, const std::vector<std::size_t>& axis_idx) {
  if (axis_idx.size() != spec.axes.size()) {
    throw std::invalid_argument("sweep_cell: axis index arity mismatch");
  }
  json cell = spec.base;
  for (std::size_t a = 0; a < spec.axes.size(); ++a) {
    const SweepAxis& axis = spec.axes[a];
    const std::string& ptr = axis_pointers().at(axis.field);
    cell[json::json_pointer(ptr)] = axis.values.at(axis_idx[a]);
  }
  return experiment_from_json(cell);
}

ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: " + path + ": expected a JSON object");

  if (!j.contains("sweep")) return experiment_from_json(j);

  const json sweep = j.at("sweep");
  check_keys(sweep, "/sweep", {"field", "values", "field2", "values2"});
  SweepSpec spec;
  spec.base = j;
  spec.base.erase("sweep");

  auto read_axis = [&](const char* field_key, const char* values_key) {
    SweepAxis axis;
    axis.field = get_string(sweep, "/sweep", field_key, "");
    if (axis_pointers().find(axis.field) == axis_pointers().end()) {
      std::string valid;
      for (const std::string& f : sweepable_fields()) {
        if (!valid.empty()) valid += ", ";
        valid += f;
      }
      fail(std::string("/sweep/") + field_key,
           "field \"" + axis.field + "\" is not sweepable (valid: " + valid + ")");
    }
    if (!sweep.contains(values_key) || !sweep.at(values_key).is_array() ||
        sweep.at(values_key).empty()) {
      fail(std::string("/sweep/") + values_key, "expected a non-empty array");
    }
    for (const json& v : sweep.at(values_key)) axis.values.push_back(v);
    return axis;
  };

  if (!sweep.contains("field")) fail("/sweep", "missing key \"field\"");
  spec.axes.push_back(read_axis("field", "values"));
  if (sweep.contains("field2") || sweep.contains("values2")) {
    spec.axes.push_back(read_axis("field2", "values2"));
  }

  // every cell must validate
  for (std::size_t cell = 0; cell < spec.num_cells(); ++cell) {
    std::vector<std::size_t> at(spec.axes.size());
    std::size_t rest = cell;
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      at[a] = rest % spec.axes[a].values.size();
      rest /= spec.axes[a].values.size();
    }
    (void)sweep_cell(spec, at);
  }
  return spec;
}

}  // namespace fedsim
