#include "fedsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fedsim {
namespace {

// substream tags; tag 0 is reserved for per-trial setup
constexpr std::uint64_t kTagData = 1;
constexpr std::uint64_t kTagPartition = 2;
constexpr std::uint64_t kTagInit = 3;

bool needs_target(const AttackConfig& attack) {
  switch (attack.kind) {
    case AttackKind::kMeanExact:
    case AttackKind::kMeanEstimated:
    case AttackKind::kKrumKkt:
      return true;
    case AttackKind::kKrumDescent:
      return attack.objective == AttackObjective::kTargeted;
    default:
      return false;
  }
}

bool is_classification(const ModelSpec& spec) {
  return spec.kind != ModelKind::kLinearRegression;
}

struct SplitData {
  Dataset train;
  Dataset test;
};

SplitData build_data(const ExperimentConfig& cfg, Rng rng) {
  SplitData out;
  switch (cfg.data.source) {
    case DataSource::kClassification: {
      Dataset all = gen_classification(cfg.data.n_train + cfg.data.n_test,
                                       cfg.model.input_dim, cfg.model.num_classes,
                                       cfg.data.separation, rng);
      std::vector<Eigen::Index> head(static_cast<std::size_t>(cfg.data.n_train));
      std::vector<Eigen::Index> tail(static_cast<std::size_t>(cfg.data.n_test));
      std::iota(head.begin(), head.end(), 0);
      std::iota(tail.begin(), tail.end(), cfg.data.n_train);
      out.train = take_rows(all, head);
      out.test = take_rows(all, tail);
      return out;
    }
    case DataSource::kRegression: {
      RegressionData all = gen_regression(cfg.data.n_train + cfg.data.n_test,
                                          cfg.model.input_dim, cfg.data.noise_sigma, rng);
      std::vector<Eigen::Index> head(static_cast<std::size_t>(cfg.data.n_train));
      std::vector<Eigen::Index> tail(static_cast<std::size_t>(cfg.data.n_test));
      std::iota(head.begin(), head.end(), 0);
      std::iota(tail.begin(), tail.end(), cfg.data.n_train);
      out.train = take_rows(all.data, head);
      out.test = take_rows(all.data, tail);
      return out;
    }
    case DataSource::kIdx:
      out.train = load_idx(cfg.data.images, cfg.data.labels);
      out.test = load_idx(cfg.data.test_images, cfg.data.test_labels);
      return out;
    case DataSource::kCsv:
      out.train = load_csv(cfg.data.csv_train);
      out.test = load_csv(cfg.data.csv_test);
      return out;
  }
  throw std::invalid_argument("engine: unknown data source");
}

ParamVector destructive_target(const ExperimentConfig& cfg) {
  const int dim = param_count(cfg.model);
  return project_box(ParamVector::Constant(dim, cfg.attack.target_fill), cfg.train.domain);
}

ParamVector flipped_target(const ExperimentConfig& cfg, const EngineState& state,
                           const std::vector<std::pair<int, const Dataset*>>& visible_data,
                           const Rng& trial_rng) {
  std::vector<const Dataset*> parts;
  for (const auto& [id, data] : visible_data) parts.push_back(data);
  Dataset flipped = flip_labels(concat_datasets(parts), state.attack_map);
  TrainOptions opts = cfg.train;
  opts.epochs = cfg.attack.target_epochs;
  // full-batch steps: the target's distance from the broadcast model scales
  // directly with target_epochs instead of the mini-batch count
  opts.batch = static_cast<int>(flipped.size());
  Rng rng = trial_rng.substream(static_cast<std::uint64_t>(state.round) + 1,
                                static_cast<std::uint64_t>(cfg.clients) + 1);
  return local_train(cfg.model, state.global, flipped, opts, rng);
}

}  // namespace

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kGaussian: return "gaussian";
    case AttackKind::kLabelFlip: return "label-flip";
    case AttackKind::kMeanExact: return "mean-exact";
    case AttackKind::kMeanEstimated: return "mean-estimated";
    case AttackKind::kKrumDescent: return "krum-descent";
    case AttackKind::kKrumKkt: return "krum-kkt";
    case AttackKind::kBlind: return "blind";
  }
  return "unknown";
}

std::string to_string(DataSource source) {
  switch (source) {
    case DataSource::kClassification: return "classification";
    case DataSource::kRegression: return "regression";
    case DataSource::kIdx: return "idx";
    case DataSource::kCsv: return "csv";
  }
  return "unknown";
}

void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.clients < 1) throw std::invalid_argument("config: clients must be >= 1");
  if (cfg.compromised < 0 || cfg.compromised >= cfg.clients) {
    throw std::invalid_argument("config: compromised (" + std::to_string(cfg.compromised) +
                                ") must satisfy 0 <= compromised < clients (" +
                                std::to_string(cfg.clients) + ")");
  }
  if (cfg.rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
  if (cfg.noniid_p < 0.0 || cfg.noniid_p > 1.0) {
    throw std::invalid_argument("config: noniid_p must lie in [0, 1]");
  }
  if (cfg.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  validate_spec(cfg.model);
  if (!(cfg.train.domain.lo <= cfg.train.domain.hi)) {
    throw std::invalid_argument("config: domain.lo must not exceed domain.hi");
  }
  if (cfg.train.epochs < 0) throw std::invalid_argument("config: train.epochs must be >= 0");
  if (cfg.train.lr < 0.0) throw std::invalid_argument("config: train.lr must be >= 0");
  if (cfg.train.batch < 1) throw std::invalid_argument("config: train.batch must be >= 1");

  // an attack with compromised == 0 is vacuous: the round stays honest, which
  // keeps sweeps over the compromised count well-formed
  const AttackConfig& a = cfg.attack;
  switch (a.kind) {
    case AttackKind::kMeanExact:
      if (cfg.aggregation.kind != RuleKind::kMean) {
        throw std::invalid_argument("config: attack mean-exact requires aggregation.rule == mean");
      }
      if (a.knowledge != KnowledgeLevel::kFull) {
        throw std::invalid_argument("config: attack mean-exact requires knowledge == full");
      }
      break;
    case AttackKind::kMeanEstimated:
      if (cfg.aggregation.kind != RuleKind::kMean) {
        throw std::invalid_argument("config: attack mean-estimated requires aggregation.rule == mean");
      }
      if (a.knowledge != KnowledgeLevel::kPartial) {
        throw std::invalid_argument("config: attack mean-estimated requires knowledge == partial");
      }
      break;
    case AttackKind::kKrumDescent:
    case AttackKind::kKrumKkt:
      if (cfg.aggregation.kind != RuleKind::kKrum) {
        throw std::invalid_argument("config: attack " + to_string(a.kind) +
                                    " requires aggregation.rule == krum");
      }
      if (a.knowledge == KnowledgeLevel::kNone) {
        throw std::invalid_argument("config: attack " + to_string(a.kind) +
                                    " requires full or partial knowledge");
      }
      validate_hyper(a.hyper);
      break;
    case AttackKind::kBlind:
      if (a.knowledge != KnowledgeLevel::kNone) {
        throw std::invalid_argument("config: attack blind requires knowledge == none");
      }
      break;
    default:
      break;
  }
  const bool targeted_crafting =
      (a.kind == AttackKind::kMeanExact || a.kind == AttackKind::kMeanEstimated ||
       a.kind == AttackKind::kKrumKkt || a.kind == AttackKind::kKrumDescent) &&
      a.objective == AttackObjective::kTargeted;
  if ((targeted_crafting || a.kind == AttackKind::kBlind || a.kind == AttackKind::kLabelFlip) &&
      cfg.model.kind == ModelKind::kLinearRegression) {
    throw std::invalid_argument("config: attack " + to_string(a.kind) +
                                (targeted_crafting ? " (targeted)" : "") +
                                " builds flipped-label targets and needs a classification model");
  }
  if (a.label_map) {
    if (static_cast<int>(a.label_map->size()) != cfg.model.num_classes) {
      throw std::invalid_argument("config: attack.label_map must list exactly num_classes entries");
    }
    for (int t : *a.label_map) {
      if (t < 0 || t >= cfg.model.num_classes) {
        throw std::invalid_argument("config: attack.label_map entries must lie in [0, num_classes)");
      }
    }
  }
  if (cfg.aggregation.kind == RuleKind::kKrum) {
    if (cfg.clients - cfg.aggregation.assumed_m - 2 < 1) {
      throw std::invalid_argument("config: krum requires clients - assumed_m - 2 >= 1");
    }
  }
  if (cfg.aggregation.kind == RuleKind::kTrimmedMean) {
    if (2 * cfg.aggregation.trim_k >= cfg.clients) {
      throw std::invalid_argument("config: trimmed-mean requires 2 * trim_k < clients");
    }
  }
}

EngineState init_state(const ExperimentConfig& cfg, const Rng& trial_rng) {
  EngineState st;
  SplitData data = build_data(cfg, trial_rng.substream(0, kTagData));

  Rng part_rng = trial_rng.substream(0, kTagPartition);
  Partition part =
      is_classification(cfg.model)
          ? partition_noniid(data.train, cfg.clients, cfg.noniid_p, cfg.model.num_classes,
                             part_rng)
          : partition_uniform(data.train, cfg.clients, part_rng);
  st.client_data.reserve(part.assignments.size());
  for (int k = 0; k < cfg.clients; ++k) {
    const auto& rows = part.assignments[static_cast<std::size_t>(k)];
    if (rows.empty()) {
      throw std::runtime_error("engine: client " + std::to_string(k) +
                               " received no data; increase n_train or lower clients");
    }
    st.client_data.push_back(take_rows(data.train, rows));
  }
  st.weights = part.weights;
  st.test = std::move(data.test);

  Rng init_rng = trial_rng.substream(0, kTagInit);
  st.global = init_params(cfg.model, init_rng);

  if (is_classification(cfg.model) && cfg.model.num_classes >= 2) {
    if (cfg.attack.label_map) {
      st.attack_map.to = *cfg.attack.label_map;
    } else {
      st.attack_map = decrement_map(cfg.model.num_classes);
    }
  } else {
    st.attack_map = identity_map(1);
  }
  st.blind = BlindState{cfg.attack.blind.eta0, std::nullopt};
  return st;
}

RoundRecord run_round(EngineState& state, const ExperimentConfig& cfg, const Rng& trial_rng) {
  const int u_count = cfg.clients;
  const int m_count = cfg.compromised;
  const int t = state.round;

  // honest local training for every client (compromised honest models feed
  // the partial-knowledge attacks)
  std::vector<ClientUpdate> honest;
  honest.reserve(static_cast<std::size_t>(u_count));
  for (int i = 0; i < u_count; ++i) {
    Rng rng = trial_rng.substream(static_cast<std::uint64_t>(t) + 1,
                                  static_cast<std::uint64_t>(i));
    honest.push_back({i,
                      local_train(cfg.model, state.global,
                                  state.client_data[static_cast<std::size_t>(i)], cfg.train, rng),
                      state.weights[static_cast<std::size_t>(i)]});
  }

  bool attack_flag = false;
  std::vector<ClientUpdate> crafted;
  const bool attacking = cfg.attack.kind != AttackKind::kNone && m_count >= 1;
  if (attacking) {
    AttackContext ctx;
    ctx.level = cfg.attack.knowledge;
    ctx.total_clients = u_count;
    ctx.objective = cfg.attack.objective;
    ctx.global_model = state.global;
    ctx.domain = cfg.train.domain;
    for (int i = 0; i < m_count; ++i) {
      ctx.compromised_ids.push_back(i);
      ctx.compromised_weights.push_back(state.weights[static_cast<std::size_t>(i)]);
    }
    if (ctx.level != KnowledgeLevel::kNone) {
      ctx.aggregation_known = cfg.aggregation;
    }
    if (ctx.level == KnowledgeLevel::kFull) {
      ctx.visible_updates = honest;
      for (int i = 0; i < u_count; ++i) {
        ctx.visible_datasets.emplace_back(i, &state.client_data[static_cast<std::size_t>(i)]);
      }
    } else {
      if (ctx.level == KnowledgeLevel::kPartial) {
        ctx.visible_updates.assign(honest.begin(), honest.begin() + m_count);
      }
      for (int i = 0; i < m_count; ++i) {
        ctx.visible_datasets.emplace_back(i, &state.client_data[static_cast<std::size_t>(i)]);
      }
    }

    if (needs_target(cfg.attack)) {
      if (cfg.attack.objective == AttackObjective::kUntargeted) {
        ctx.target = destructive_target(cfg);
      } else {
        ctx.target = flipped_target(cfg, state, ctx.visible_datasets, trial_rng);
      }
      ctx.objective = AttackObjective::kTargeted;  // the crafting itself is always targeted
    }

    Rng attack_rng = trial_rng.substream(static_cast<std::uint64_t>(t) + 1,
                                         static_cast<std::uint64_t>(u_count) + 2);
    const auto start = std::chrono::steady_clock::now();
    switch (cfg.attack.kind) {
      case AttackKind::kGaussian:
        crafted = attack_gaussian(ctx, cfg.attack.gaussian_sigma, attack_rng);
        break;
      case AttackKind::kLabelFlip:
        crafted = attack_label_flip(ctx, state.attack_map, cfg.model, cfg.train, attack_rng);
        break;
      case AttackKind::kMeanExact: {
        MeanAttackResult r = attack_mean_exact(ctx);
        crafted = std::move(r.updates);
        attack_flag = r.feasible;
        break;
      }
      case AttackKind::kMeanEstimated: {
        MeanAttackResult r = attack_mean_estimated(ctx, cfg.attack.estimator);
        crafted = std::move(r.updates);
        attack_flag = r.feasible;
        break;
      }
      case AttackKind::kKrumDescent: {
        KrumAttackResult r = attack_krum_descent(ctx, cfg.attack.hyper, cfg.model, attack_rng);
        crafted = std::move(r.updates);
        attack_flag = r.selected;
        break;
      }
      case AttackKind::kKrumKkt: {
        KrumAttackResult r =
            attack_krum_kkt(ctx, cfg.attack.hyper, cfg.model, attack_rng, cfg.attack.alpha_method);
        crafted = std::move(r.updates);
        attack_flag = r.selected;
        break;
      }
      case AttackKind::kBlind: {
        auto [updates, next] =
            attack_blind_round(state.blind, cfg.attack.blind, ctx, cfg.model, state.attack_map,
                               attack_rng);
        crafted = std::move(updates);
        state.blind = std::move(next);
        break;
      }
      case AttackKind::kNone:
        break;
    }
    const auto stop = std::chrono::steady_clock::now();
    if (state.wallclock_sink) {
      state.wallclock_sink->push_back(std::chrono::duration<double>(stop - start).count());
    }
  }

  std::vector<ClientUpdate> round_updates;
  round_updates.reserve(static_cast<std::size_t>(u_count));
  for (int i = 0; i < u_count; ++i) {
    if (attacking && i < m_count) {
      round_updates.push_back(crafted[static_cast<std::size_t>(i)]);
    } else {
      round_updates.push_back(honest[static_cast<std::size_t>(i)]);
    }
  }

  AggregationOutcome outcome = aggregate(cfg.aggregation, round_updates);
  state.global = outcome.global;

  RoundRecord rec;
  rec.round = t;
  rec.global = state.global;
  rec.selected_id = outcome.selected_id;
  rec.attack_flag = attack_flag;
  rec.metrics["loss"] = loss(cfg.model, state.global, state.test);
  if (is_classification(cfg.model)) {
    rec.metrics["error_rate"] = metric_error_rate(cfg.model, state.global, state.test);
    if (cfg.model.num_classes >= 2) {
      rec.metrics["attacker_accuracy"] =
          metric_attacker_accuracy(cfg.model, state.global, state.test, state.attack_map);
    }
  }
  if (outcome.selected_id) {
    rec.metrics["selected_id"] = static_cast<double>(*outcome.selected_id);
    rec.metrics["success"] = (*outcome.selected_id < m_count) ? 1.0 : 0.0;
  }
  ++state.round;
  return rec;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  MetricsReport rep;
  std::vector<double> wallclock;
  Rng base(cfg.seed);

  std::vector<int> compromised_ids;
  for (int i = 0; i < cfg.compromised; ++i) compromised_ids.push_back(i);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    Rng trial_rng = base.substream(0xA11CE, static_cast<std::uint64_t>(trial));
    EngineState st = init_state(cfg, trial_rng);
    st.wallclock_sink = &wallclock;
    TrialResult tr;
    for (int t = 0; t < cfg.rounds; ++t) {
      tr.rounds.push_back(run_round(st, cfg, trial_rng));
    }
    rep.trials.push_back(std::move(tr));
  }

  // trial averages of the last-round metrics; selection bookkeeping stays
  // per-round (success_rate summarizes it)
  for (const auto& [key, value] : rep.trials.front().rounds.back().metrics) {
    (void)value;
    if (key == "selected_id" || key == "success") continue;
    std::vector<double> finals;
    for (const TrialResult& tr : rep.trials) finals.push_back(tr.rounds.back().metrics.at(key));
    double sum = 0.0;
    for (double v : finals) sum += v;
    rep.final_metrics["final_" + key] = sum / static_cast<double>(finals.size());
    rep.per_trial_finals["final_" + key] = std::move(finals);
  }
  if (cfg.aggregation.kind == RuleKind::kKrum) {
    std::vector<double> rates;
    for (const TrialResult& tr : rep.trials) {
      rates.push_back(metric_success_rate(tr.rounds, compromised_ids));
    }
    double sum = 0.0;
    for (double v : rates) sum += v;
    rep.final_metrics["success_rate"] = sum / static_cast<double>(rates.size());
    rep.per_trial_finals["success_rate"] = std::move(rates);
  }

  rep.attack_invocations = static_cast<std::int64_t>(wallclock.size());
  if (!wallclock.empty()) {
    double sum = 0.0;
    for (double v : wallclock) sum += v;
    rep.attack_wallclock_mean = sum / static_cast<double>(wallclock.size());
    double var = 0.0;
    for (double v : wallclock) {
      var += (v - rep.attack_wallclock_mean) * (v - rep.attack_wallclock_mean);
    }
    rep.attack_wallclock_std = std::sqrt(var / static_cast<double>(wallclock.size()));
  }
  return rep;
}

double metric_error_rate(const ModelSpec& spec, const ParamVector& params,
                         const Dataset& test) {
  if (spec.kind == ModelKind::kLinearRegression) {
    throw std::invalid_argument("metric_error_rate: regression models report the normalized cost");
  }
  Eigen::VectorXd pred = predict(spec, params, test.features);
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    if (static_cast<int>(pred[i]) != test.label_at(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

double metric_attacker_accuracy(const ModelSpec& spec, const ParamVector& params,
                                const Dataset& test, const LabelMap& map) {
  if (spec.kind == ModelKind::kLinearRegression) {
    throw std::invalid_argument("metric_attacker_accuracy: needs a classification model");
  }
  Eigen::VectorXd pred = predict(spec, params, test.features);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    if (static_cast<int>(pred[i]) == map.apply(test.label_at(i))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double metric_success_rate(const std::vector<RoundRecord>& records,
                           const std::vector<int>& compromised_ids) {
  if (records.empty()) throw std::invalid_argument("metric_success_rate: no rounds");
  Eigen::Index hits = 0;
  for (const RoundRecord& rec : records) {
    if (!rec.selected_id) {
      throw std::invalid_argument(
          "metric_success_rate: round " + std::to_string(rec.round) +
          " has no selection; the metric applies to Krum aggregation only");
    }
    if (std::binary_search(compromised_ids.begin(), compromised_ids.end(), *rec.selected_id)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

}  // namespace fedsim
