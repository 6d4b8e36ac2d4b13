#include "fedsim/engine.hpp"

#include <doctest.h>

using namespace fedsim;

namespace {

ExperimentConfig small_classification_config() {
  ExperimentConfig cfg;
  cfg.clients = 6;
  cfg.compromised = 0;
  cfg.rounds = 3;
  cfg.noniid_p = 0.0;
  cfg.trials = 1;
  cfg.seed = 11;
  cfg.model = {ModelKind::kMlp, 3, 3, 4};
  cfg.data.source = DataSource::kClassification;
  cfg.data.n_train = 120;
  cfg.data.n_test = 60;
  cfg.data.separation = 5.0;
  cfg.train.epochs = 1;
  cfg.train.lr = 0.1;
  cfg.train.batch = 8;
  return cfg;
}

}  // namespace

TEST_CASE("metric_error_rate and metric_attacker_accuracy basics") {
  ModelSpec spec{ModelKind::kMlp, 2, 3, 4};
  Rng rng(5);
  Dataset test = gen_classification(90, 2, 3, 6.0, rng);

  // a zero model predicts class 0 everywhere
  ParamVector zero = ParamVector::Zero(param_count(spec));
  double err = metric_error_rate(spec, zero, test);
  Eigen::Index zeros = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    if (test.label_at(i) == 0) ++zeros;
  }
  CHECK(err == doctest::Approx(1.0 - static_cast<double>(zeros) / test.size()));

  // identity map: attacker accuracy is exactly the complement of the error rate
  double acc = metric_attacker_accuracy(spec, zero, test, identity_map(3));
  CHECK(acc == doctest::Approx(1.0 - err));

  // a non-identity map on the constant classifier: hits only where map(l) == 0
  double flipped = metric_attacker_accuracy(spec, zero, test, decrement_map(3));
  Eigen::Index ones = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    if (test.label_at(i) == 1) ++ones;  // map(1) == 0
  }
  CHECK(flipped == doctest::Approx(static_cast<double>(ones) / test.size()));

  ModelSpec reg{ModelKind::kLinearRegression, 2, 1, 0};
  CHECK_THROWS_AS(metric_error_rate(reg, ParamVector::Zero(3), test), std::invalid_argument);
}

TEST_CASE("metric_success_rate counts compromised selections") {
  std::vector<RoundRecord> records(4);
  for (int t = 0; t < 4; ++t) records[static_cast<std::size_t>(t)].round = t;
  records[0].selected_id = 0;
  records[1].selected_id = 5;
  records[2].selected_id = 1;
  records[3].selected_id = 7;
  CHECK(metric_success_rate(records, {0, 1}) == doctest::Approx(0.5));
  CHECK(metric_success_rate(records, {}) == 0.0);

  records[2].selected_id.reset();
  CHECK_THROWS_AS(metric_success_rate(records, {0, 1}), std::invalid_argument);
}

TEST_CASE("pure FL round under mean aggregation reproduces the weighted average") {
  ExperimentConfig cfg = small_classification_config();
  Rng trial_rng = Rng(cfg.seed).substream(0xA11CE, 0);
  EngineState st = init_state(cfg, trial_rng);

  // recompute the honest updates the round will produce
  ParamVector broadcast = st.global;
  std::vector<ClientUpdate> expected;
  for (int i = 0; i < cfg.clients; ++i) {
    Rng rng = trial_rng.substream(1, static_cast<std::uint64_t>(i));
    expected.push_back({i,
                        local_train(cfg.model, broadcast,
                                    st.client_data[static_cast<std::size_t>(i)], cfg.train, rng),
                        st.weights[static_cast<std::size_t>(i)]});
  }
  RoundRecord rec = run_round(st, cfg, trial_rng);
  CHECK((rec.global - aggregate_mean(expected).global).norm() == 0.0);
  CHECK(!rec.selected_id.has_value());
}

TEST_CASE("krum rounds return an uploaded vector bitwise") {
  ExperimentConfig cfg = small_classification_config();
  cfg.compromised = 1;
  cfg.aggregation.kind = RuleKind::kKrum;
  cfg.aggregation.assumed_m = 1;
  cfg.attack.kind = AttackKind::kGaussian;
  cfg.attack.knowledge = KnowledgeLevel::kPartial;
  cfg.rounds = 2;

  MetricsReport rep = run_experiment(cfg);
  for (const RoundRecord& rec : rep.trials[0].rounds) {
    CHECK(rec.selected_id.has_value());
    CHECK(rec.metrics.count("success") == 1);
  }
  CHECK(rep.final_metrics.count("success_rate") == 1);

  // honest round: the global is the selected client's upload, copied exactly
  ExperimentConfig honest = small_classification_config();
  honest.aggregation.kind = RuleKind::kKrum;
  honest.aggregation.assumed_m = 1;
  Rng trial_rng = Rng(honest.seed).substream(0xA11CE, 0);
  EngineState st = init_state(honest, trial_rng);
  ParamVector broadcast = st.global;
  std::vector<ClientUpdate> uploads;
  for (int i = 0; i < honest.clients; ++i) {
    Rng rng = trial_rng.substream(1, static_cast<std::uint64_t>(i));
    uploads.push_back({i,
                       local_train(honest.model, broadcast,
                                   st.client_data[static_cast<std::size_t>(i)], honest.train,
                                   rng),
                       st.weights[static_cast<std::size_t>(i)]});
  }
  RoundRecord rec = run_round(st, honest, trial_rng);
  REQUIRE(rec.selected_id.has_value());
  CHECK((rec.global - uploads[static_cast<std::size_t>(*rec.selected_id)].params).norm() ==
        0.0);
}

TEST_CASE("engine with M=0 matches single-loop training on the pooled data") {
  // full batch, one epoch: a round of client steps averaged with p_i = n_i/n
  // equals one pooled gradient step
  ExperimentConfig cfg = small_classification_config();
  cfg.model = {ModelKind::kLinearSvm, 3, 2, 0};
  cfg.data.source = DataSource::kClassification;
  cfg.model.num_classes = 2;
  cfg.rounds = 4;
  cfg.train.batch = 1 << 20;
  cfg.train.epochs = 1;
  cfg.train.lr = 0.2;

  Rng trial_rng = Rng(cfg.seed).substream(0xA11CE, 0);
  EngineState st = init_state(cfg, trial_rng);

  Dataset pooled;
  {
    std::vector<const Dataset*> parts;
    for (const Dataset& d : st.client_data) parts.push_back(&d);
    pooled = concat_datasets(parts);
  }

  ParamVector reference = st.global;
  for (int t = 0; t < cfg.rounds; ++t) {
    RoundRecord rec = run_round(st, cfg, trial_rng);
    reference = project_box(
        reference - cfg.train.lr * loss_gradient(cfg.model, reference, pooled),
        cfg.train.domain);
    CHECK((rec.global - reference).norm() <= 1e-9 * (1.0 + reference.norm()));
  }
}

TEST_CASE("gaussian attack under mean aggregation shifts the global by the weighted noise") {
  ExperimentConfig cfg = small_classification_config();
  cfg.compromised = 2;
  cfg.attack.kind = AttackKind::kGaussian;
  cfg.attack.knowledge = KnowledgeLevel::kPartial;
  cfg.attack.gaussian_sigma = 0.5;
  cfg.rounds = 1;

  ExperimentConfig honest_cfg = cfg;
  honest_cfg.attack.kind = AttackKind::kNone;

  // identical seeds: the honest uploads match, so the global difference is
  // exactly the weighted sum of the injected perturbations
  MetricsReport attacked = run_experiment(cfg);
  MetricsReport honest = run_experiment(honest_cfg);

  Rng trial_rng = Rng(cfg.seed).substream(0xA11CE, 0);
  EngineState st = init_state(cfg, trial_rng);
  ParamVector expected_shift = ParamVector::Zero(st.global.size());
  {
    std::vector<ClientUpdate> honest_updates;
    for (int i = 0; i < cfg.compromised; ++i) {
      Rng rng = trial_rng.substream(1, static_cast<std::uint64_t>(i));
      honest_updates.push_back({i,
                                local_train(cfg.model, st.global,
                                            st.client_data[static_cast<std::size_t>(i)],
                                            cfg.train, rng),
                                st.weights[static_cast<std::size_t>(i)]});
    }
    AttackContext ctx;
    ctx.level = KnowledgeLevel::kPartial;
    ctx.total_clients = cfg.clients;
    ctx.visible_updates = honest_updates;
    for (int i = 0; i < cfg.compromised; ++i) {
      ctx.compromised_ids.push_back(i);
      ctx.compromised_weights.push_back(st.weights[static_cast<std::size_t>(i)]);
      ctx.visible_datasets.emplace_back(i, &st.client_data[static_cast<std::size_t>(i)]);
    }
    ctx.global_model = st.global;
    ctx.aggregation_known = cfg.aggregation;
    Rng attack_rng = trial_rng.substream(1, static_cast<std::uint64_t>(cfg.clients) + 2);
    auto crafted = attack_gaussian(ctx, cfg.attack.gaussian_sigma, attack_rng);
    for (int i = 0; i < cfg.compromised; ++i) {
      expected_shift += crafted[static_cast<std::size_t>(i)].weight *
                        (crafted[static_cast<std::size_t>(i)].params -
                         honest_updates[static_cast<std::size_t>(i)].params);
    }
  }
  ParamVector actual_shift =
      attacked.trials[0].rounds[0].global - honest.trials[0].rounds[0].global;
  CHECK((actual_shift - expected_shift).norm() <= 1e-12 * (1.0 + expected_shift.norm()));
}

TEST_CASE("exact mean attack through the engine pins the aggregate to its target") {
  ExperimentConfig cfg = small_classification_config();
  cfg.compromised = 2;
  cfg.attack.kind = AttackKind::kMeanExact;
  cfg.attack.knowledge = KnowledgeLevel::kFull;
  cfg.attack.objective = AttackObjective::kTargeted;
  cfg.attack.target_epochs = 1;
  cfg.rounds = 2;

  Rng trial_rng = Rng(cfg.seed).substream(0xA11CE, 0);
  EngineState st = init_state(cfg, trial_rng);
  // recompute this round's target the way the engine does
  std::vector<const Dataset*> parts;
  for (const Dataset& d : st.client_data) parts.push_back(&d);
  Dataset flipped = flip_labels(concat_datasets(parts), st.attack_map);
  TrainOptions topts = cfg.train;
  topts.epochs = cfg.attack.target_epochs;
  topts.batch = static_cast<int>(flipped.size());
  Rng target_rng = trial_rng.substream(1, static_cast<std::uint64_t>(cfg.clients) + 1);
  ParamVector target = local_train(cfg.model, st.global, flipped, topts, target_rng);

  RoundRecord rec = run_round(st, cfg, trial_rng);
  // this instance is feasible (no box clipping), so the aggregate is exact
  REQUIRE(rec.attack_flag);
  CHECK((rec.global - target).norm() <= 1e-9 * (1.0 + target.norm()));
}

TEST_CASE("gaussian noise against the selection rule stays unselected over 50 rounds") {
  ExperimentConfig cfg;
  cfg.clients = 20;
  cfg.compromised = 4;
  cfg.rounds = 50;
  cfg.noniid_p = 0.5;
  cfg.seed = 5000;
  cfg.model = {ModelKind::kMlp, 6, 3, 8};
  cfg.data.n_train = 600;
  cfg.data.n_test = 300;
  cfg.data.separation = 6.0;
  cfg.train.epochs = 1;
  cfg.train.lr = 0.25;
  cfg.train.batch = 8;
  cfg.aggregation.kind = RuleKind::kKrum;
  cfg.aggregation.assumed_m = 4;
  cfg.attack.kind = AttackKind::kGaussian;
  cfg.attack.knowledge = KnowledgeLevel::kPartial;
  cfg.attack.gaussian_sigma = 10.0;
  MetricsReport rep = run_experiment(cfg);
  CHECK(rep.final_metrics.at("success_rate") == 0.0);
}

TEST_CASE("blind attack runs against trimmed-mean aggregation") {
  ExperimentConfig cfg = small_classification_config();
  cfg.compromised = 2;
  cfg.aggregation.kind = RuleKind::kTrimmedMean;
  cfg.aggregation.trim_k = 2;
  cfg.attack.kind = AttackKind::kBlind;
  cfg.attack.knowledge = KnowledgeLevel::kNone;
  cfg.rounds = 5;

  MetricsReport rep = run_experiment(cfg);
  CHECK(rep.trials[0].rounds.size() == 5);
  CHECK(rep.final_metrics.count("final_error_rate") == 1);
  CHECK(rep.final_metrics.count("success_rate") == 0);  // no selection rule
  for (const RoundRecord& rec : rep.trials[0].rounds) {
    CHECK(!rec.selected_id.has_value());
    CHECK(rec.metrics.at("error_rate") >= 0.0);
    CHECK(rec.metrics.at("error_rate") <= 1.0);
  }

  // identical config and seed reproduce the report bitwise
  MetricsReport again = run_experiment(cfg);
  CHECK((again.trials[0].rounds.back().global - rep.trials[0].rounds.back().global).norm() ==
        0.0);
}

TEST_CASE("run_experiment determinism and rate ranges") {
  ExperimentConfig cfg = small_classification_config();
  cfg.compromised = 2;
  cfg.aggregation.kind = RuleKind::kKrum;
  cfg.aggregation.assumed_m = 2;
  cfg.attack.kind = AttackKind::kKrumDescent;
  cfg.attack.knowledge = KnowledgeLevel::kFull;
  cfg.attack.objective = AttackObjective::kTargeted;
  cfg.trials = 2;
  cfg.rounds = 3;

  MetricsReport a = run_experiment(cfg);
  MetricsReport b = run_experiment(cfg);
  CHECK(a.final_metrics.size() == b.final_metrics.size());
  for (const auto& [key, value] : a.final_metrics) {
    CHECK(value == b.final_metrics.at(key));  // bitwise identical
  }
  for (std::size_t trial = 0; trial < a.trials.size(); ++trial) {
    for (std::size_t t = 0; t < a.trials[trial].rounds.size(); ++t) {
      CHECK((a.trials[trial].rounds[t].global - b.trials[trial].rounds[t].global).norm() == 0.0);
    }
  }

  for (const auto& [key, value] : a.final_metrics) {
    if (key == "final_loss") continue;  // unbounded metric
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
  }
  CHECK(a.trials[0].rounds.size() == static_cast<std::size_t>(cfg.rounds));
}

TEST_CASE("T=1 with one trial reproduces a single run_round") {
  ExperimentConfig cfg = small_classification_config();
  cfg.rounds = 1;
  cfg.trials = 1;
  MetricsReport rep = run_experiment(cfg);

  Rng trial_rng = Rng(cfg.seed).substream(0xA11CE, 0);
  EngineState st = init_state(cfg, trial_rng);
  RoundRecord rec = run_round(st, cfg, trial_rng);
  CHECK((rep.trials[0].rounds[0].global - rec.global).norm() == 0.0);
}

TEST_CASE("targeted selection attack beats label flipping on paired seeds") {
  // compact paired comparison; the acceptance suite runs the 20-seed version
  ExperimentConfig base;
  base.clients = 20;
  base.compromised = 4;
  base.rounds = 15;
  base.noniid_p = 0.5;
  base.model = {ModelKind::kMlp, 6, 3, 8};
  base.data.n_train = 600;
  base.data.n_test = 300;
  base.data.separation = 6.0;
  base.train.epochs = 1;
  base.train.lr = 0.25;
  base.train.batch = 8;
  base.aggregation.kind = RuleKind::kKrum;
  base.aggregation.assumed_m = 4;

  int wins = 0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    ExperimentConfig krum_cfg = base;
    krum_cfg.seed = 5000 + static_cast<std::uint64_t>(seed);
    krum_cfg.attack.kind = AttackKind::kKrumDescent;
    krum_cfg.attack.knowledge = KnowledgeLevel::kFull;
    krum_cfg.attack.objective = AttackObjective::kTargeted;
    krum_cfg.attack.target_epochs = 5;
    krum_cfg.attack.hyper.eta0 = 0.02;
    krum_cfg.attack.hyper.max_iters = 60;

    ExperimentConfig flip_cfg = base;
    flip_cfg.seed = krum_cfg.seed;
    flip_cfg.attack.kind = AttackKind::kLabelFlip;
    flip_cfg.attack.knowledge = KnowledgeLevel::kPartial;

    double krum_acc = run_experiment(krum_cfg).final_metrics.at("final_attacker_accuracy");
    double flip_acc = run_experiment(flip_cfg).final_metrics.at("final_attacker_accuracy");
    if (krum_acc > flip_acc) ++wins;
  }
  CHECK(wins == seeds);
}

TEST_CASE("config validation names offending fields") {
  ExperimentConfig cfg = small_classification_config();
  cfg.compromised = cfg.clients;
  CHECK_THROWS_WITH_AS(validate_experiment(cfg), doctest::Contains("compromised"),
                       std::invalid_argument);

  cfg = small_classification_config();
  cfg.noniid_p = 1.5;
  CHECK_THROWS_WITH_AS(validate_experiment(cfg), doctest::Contains("noniid_p"),
                       std::invalid_argument);

  cfg = small_classification_config();
  cfg.attack.kind = AttackKind::kMeanExact;
  cfg.compromised = 2;
  cfg.aggregation.kind = RuleKind::kKrum;
  CHECK_THROWS_AS(validate_experiment(cfg), std::invalid_argument);
}
