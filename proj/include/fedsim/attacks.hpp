#pragma once

#include "fedsim/aggregation.hpp"
#include "fedsim/datakit.hpp"
#include "fedsim/models.hpp"
#include "fedsim/numkit.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace fedsim {

/// What the attacker observes each round: everything (full), only the
/// compromised clients' uploads and data (partial), or only the compromised
/// datasets plus the broadcast model (none).
enum class KnowledgeLevel { kFull, kPartial, kNone };

enum class AttackObjective { kTargeted, kUntargeted };

std::string to_string(KnowledgeLevel level);

/// The attacker's view of one round.
struct AttackContext {
  KnowledgeLevel level = KnowledgeLevel::kFull;
  int total_clients = 0;                                     // U
  std::vector<ClientUpdate> visible_updates;                 // honest uploads in view
  std::vector<std::pair<int, const Dataset*>> visible_datasets;  // (client id, data)
  std::vector<int> compromised_ids;                          // ascending, size M >= 1
  std::vector<double> compromised_weights;                   // p_i, aligned with ids
  ParamVector global_model;                                  // broadcast this round
  std::optional<ParamVector> target;                         // theta*, targeted mode
  AttackObjective objective = AttackObjective::kTargeted;
  std::optional<AggregationRule> aggregation_known;          // absent when level == none
  BoxDomain domain;

  int num_compromised() const { return static_cast<int>(compromised_ids.size()); }
  bool is_compromised(int id) const;
  /// Visible honest uploads of benign clients (full knowledge only).
  std::vector<ClientUpdate> visible_benign() const;
  /// Visible honest uploads of compromised clients.
  std::vector<ClientUpdate> visible_compromised() const;
  Dataset visible_data_union() const;
  Dataset compromised_data_union() const;
};

/// Step-size and collusion parameters shared by the Krum attacks.
struct AttackHyper {
  double eta0 = 0.05;      // initial step size
  double decay = 0.7;      // step shrink after a rejected move, in (0, 1)
  double sigma = 0.05;     // std of the Gaussian used to draw collusion directions
  double eps = 0.01;       // norm of every colluding offset
  double varsigma = 1e-4;  // stop once the step size falls below this
  int max_iters = 100;     // hard cap on inner iterations
  double kkt_tol = 1e-8;   // residual tolerance for the constrained solver
  int restarts = 8;        // random subsets tried by AlphaMethod::kRestarts
};

void validate_hyper(const AttackHyper& hyper);

/// Parameters of the blind (no-knowledge) attack. Its step size grows by
/// `growth` after an accepted round and shrinks by the same factor after a
/// rejected one, clamped into [eta_min, eta_max].
struct BlindHyper {
  double eta0 = 0.1;
  double growth = 1.5;   // > 1
  double xi = 0.05;      // acceptance threshold on ||prev crafted - global||
  double eta_min = 1e-6;
  double eta_max = 100.0;
  double sigma = 0.05;
  double eps = 0.01;
};

struct BlindState {
  double eta = 0.1;
  std::optional<ParamVector> prev_crafted;  // lead model uploaded last round
};

/// Attack objective F_A: targeted is ||params - theta*||^2 with gradient
/// 2(params - theta*); untargeted is the negated data loss over the visible
/// datasets (the attacker maximizes the benign objective).
std::pair<double, ParamVector> attacker_objective(const ParamVector& params,
                                                  const AttackContext& ctx,
                                                  const ModelSpec& spec);

/// Baseline: each compromised upload is its honest model plus N(0, sigma^2)
/// per coordinate, projected into the domain.
std::vector<ClientUpdate> attack_gaussian(const AttackContext& ctx, double sigma, Rng& rng);

/// Baseline: each compromised client trains honestly on its label-flipped
/// dataset from the broadcast model.
std::vector<ClientUpdate> attack_label_flip(const AttackContext& ctx, const LabelMap& map,
                                            const ModelSpec& spec, const TrainOptions& train,
                                            Rng& rng);

struct MeanAttackResult {
  std::vector<ClientUpdate> updates;
  bool feasible = true;          // false when the box projection moved the solution
  double predicted_objective = 0.0;
};

/// Full knowledge, mean rule: solves the aggregation constraint exactly so the
/// round's weighted mean lands on theta*. Infeasible solutions (outside the
/// box) are projected and flagged; the aggregate then misses theta*.
MeanAttackResult attack_mean_exact(const AttackContext& ctx);

/// Closed-form coefficient used to estimate the unseen benign mass from the
/// compromised uploads. With s the compromised weight mass, kConsistent uses
/// (1 - 1/s) — the value the estimate's own derivation gives — while
/// kOvershoot uses (2/s - 1), a stronger push kept as an alternative.
enum class MeanEstimator { kConsistent, kOvershoot };

/// Partial knowledge, mean rule: crafted = (theta* + coef * sum_M p_i
/// theta_i) / s. predicted_objective reports coef^2 ||sum_M p_i theta_i||^2,
/// the attacker's own estimate of the residual objective.
MeanAttackResult attack_mean_estimated(const AttackContext& ctx, MeanEstimator variant);

struct KrumAttackResult {
  std::vector<ClientUpdate> updates;
  bool selected = false;  // the attacker's own selection check at exit
  int iterations = 0;
};

/// Projected-gradient attack on the Krum rule. The lead model starts at the
/// broadcast global model and descends F_A; the other M-1 compromised uploads
/// are the lead plus a norm-eps Gaussian direction. After every step the
/// attacker re-runs the selection rule over its visible set (true benign
/// models under full knowledge, its own honest models standing in under
/// partial knowledge); a rejected step is reverted and the step size decays.
/// Stops when the step size falls below varsigma or after max_iters.
KrumAttackResult attack_krum_descent(const AttackContext& ctx, const AttackHyper& hyper,
                                     const ModelSpec& spec, Rng& rng);

/// E: the minimum over benign clients of the summed distances to the B - 2
/// nearest benign peers — the score floor any crafted model must beat.
double min_benign_score(const std::vector<ClientUpdate>& benign, int num_compromised);

/// Start of the constrained search: the point on the sphere induced by the
/// strengthened distance constraint (center: benign mean) in the direction of
/// the target. Degenerate geometry (negative squared radius, target at the
/// center) falls back to the center itself.
ParamVector constraint_sphere_init(const std::vector<ClientUpdate>& benign,
                                   const ParamVector& target, int num_compromised,
                                   int total_clients, double eps, double min_score);

struct KktState {
  ParamVector iterate;
  double multiplier = 0.0;
  double stationarity_residual = 0.0;
  double constraint_residual = 0.0;
};

/// Solves  min ||x - target||^2  s.t.  sum_j alpha_j ||x - theta_j|| +
/// (M-1) eps - E <= 0  via bisection on the multiplier with damped
/// fixed-point inner iterations. A target that already satisfies the
/// constraint returns immediately with multiplier 0. Throws when the
/// constraint set is empty or residuals cannot reach tol.
KktState solve_distance_kkt(const std::vector<int>& alpha,
                            const std::vector<ClientUpdate>& benign,
                            const ParamVector& target, int num_compromised, double eps,
                            double min_score, const ParamVector& init, double tol);

enum class AlphaMethod { kGreedy, kExhaustive, kRestarts };

std::string to_string(AlphaMethod method);

struct SubsetConstraint {
  std::vector<int> alpha;        // 0/1 over the benign list, subset_size ones
  double min_score = 0.0;        // E
  double eps = 0.0;
  Eigen::VectorXd benign_sum;    // sum of benign models
  double lambda_term = 0.0;      // slack term of the strengthened constraint
};

/// Chooses which benign models the distance constraint binds to. kGreedy takes
/// the subset nearest the target; kExhaustive tries every subset (B <= 12) and
/// keeps the one whose KKT solution scores best; kRestarts adds random subsets
/// to the greedy pick.
SubsetConstraint select_alpha(const std::vector<ClientUpdate>& benign,
                              const ParamVector& target, int num_compromised,
                              int total_clients, double eps, AlphaMethod method, Rng& rng,
                              int restarts = 8,
                              std::optional<int> subset_size_override = std::nullopt);

/// Low-complexity Krum attack: min_benign_score -> select_alpha ->
/// constraint_sphere_init -> solve_distance_kkt, then the usual collusion
/// copies and selection check. Solver infeasibility falls back first to the
/// subset anchored at the best-scoring benign model, then to that model
/// itself.
KrumAttackResult attack_krum_kkt(const AttackContext& ctx, const AttackHyper& hyper,
                                 const ModelSpec& spec, Rng& rng,
                                 AlphaMethod method = AlphaMethod::kGreedy);

/// One round of the blind attack: adapt the step size from the served global
/// model (first round counts as rejected), then take one projected gradient
/// step on the label-flipped training loss from the broadcast model and emit
/// the collusion copies.
std::pair<std::vector<ClientUpdate>, BlindState> attack_blind_round(
    const BlindState& state, const BlindHyper& hyper, const AttackContext& ctx,
    const ModelSpec& spec, const LabelMap& map, Rng& rng);

}  // namespace fedsim
