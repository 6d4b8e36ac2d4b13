#pragma once

#include "fedsim/aggregation.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/datakit.hpp"
#include "fedsim/models.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fedsim {

enum class AttackKind {
  kNone,
  kGaussian,
  kLabelFlip,
  kMeanExact,      // full knowledge, mean rule
  kMeanEstimated,  // partial knowledge, mean rule
  kKrumDescent,    // projected-gradient attack with selection feedback
  kKrumKkt,        // low-complexity constrained variant
  kBlind,          // no knowledge, adapts to the served global model
};

std::string to_string(AttackKind kind);

struct AttackConfig {
  AttackKind kind = AttackKind::kNone;
  KnowledgeLevel knowledge = KnowledgeLevel::kPartial;
  AttackObjective objective = AttackObjective::kTargeted;
  AttackHyper hyper;
  BlindHyper blind;
  MeanEstimator estimator = MeanEstimator::kConsistent;
  AlphaMethod alpha_method = AlphaMethod::kGreedy;
  double gaussian_sigma = 10.0;
  /// Epochs of flipped-label training that build the per-round target model.
  int target_epochs = 3;
  /// Untargeted mean attacks steer toward this constant-fill vector.
  double target_fill = 8.0;
  /// Explicit label map; default is the cyclic decrement map.
  std::optional<std::vector<int>> label_map;
};

enum class DataSource { kClassification, kRegression, kIdx, kCsv };

std::string to_string(DataSource source);

struct DataConfig {
  DataSource source = DataSource::kClassification;
  Eigen::Index n_train = 400;
  Eigen::Index n_test = 200;
  double separation = 6.0;   // classification blobs
  double noise_sigma = 0.05; // regression noise
  std::string images, labels, test_images, test_labels;  // idx paths
  std::string csv_train, csv_test;                       // csv paths
};

struct ExperimentConfig {
  int clients = 10;      // U
  int compromised = 0;   // M, the first M client ids
  int rounds = 10;       // T
  double noniid_p = 0.0;
  int trials = 1;
  std::uint64_t seed = 1;
  ModelSpec model;
  DataConfig data;
  TrainOptions train;
  AggregationRule aggregation;
  AttackConfig attack;
};

void validate_experiment(const ExperimentConfig& cfg);

struct RoundRecord {
  int round = 0;
  ParamVector global;
  std::optional<int> selected_id;  // Krum rounds
  bool attack_flag = false;        // the attack's own success/feasibility indicator
  std::map<std::string, double> metrics;
};

struct TrialResult {
  std::vector<RoundRecord> rounds;
};

struct MetricsReport {
  std::vector<TrialResult> trials;
  std::map<std::string, double> final_metrics;  // trial averages of last-round metrics
  std::map<std::string, std::vector<double>> per_trial_finals;
  double attack_wallclock_mean = 0.0;  // seconds per attack invocation
  double attack_wallclock_std = 0.0;
  std::int64_t attack_invocations = 0;
};

/// Mutable state threaded through the rounds of one trial.
struct EngineState {
  ParamVector global;
  std::vector<Dataset> client_data;
  std::vector<double> weights;
  Dataset test;
  LabelMap attack_map;
  BlindState blind;
  int round = 0;
  std::vector<double>* wallclock_sink = nullptr;  // attack timings, seconds
};

EngineState init_state(const ExperimentConfig& cfg, const Rng& trial_rng);

/// One communication round: broadcast, benign local training, attack
/// injection, aggregation, metric collection.
RoundRecord run_round(EngineState& state, const ExperimentConfig& cfg, const Rng& trial_rng);

/// Runs `trials` independent trials of `rounds` rounds each with derived
/// seeds and averages the final metrics.
MetricsReport run_experiment(const ExperimentConfig& cfg);

/// Fraction of test examples misclassified. Classification models only.
double metric_error_rate(const ModelSpec& spec, const ParamVector& params,
                         const Dataset& test);

/// Fraction of test examples predicted as map(true label).
double metric_attacker_accuracy(const ModelSpec& spec, const ParamVector& params,
                                const Dataset& test, const LabelMap& map);

/// Fraction of rounds whose selected upload was compromised. Errors unless
/// every record carries a selection (i.e. the rule was Krum).
double metric_success_rate(const std::vector<RoundRecord>& records,
                           const std::vector<int>& compromised_ids);

}  // namespace fedsim
