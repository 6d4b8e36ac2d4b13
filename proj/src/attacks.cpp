#include "fedsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fedsim {
namespace {

constexpr double kDistanceFloor = 1e-12;  // keeps 1/||x - theta_j|| finite

std::vector<int> sorted_copy(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

Dataset union_of(const std::vector<std::pair<int, const Dataset*>>& parts,
                 const std::vector<int>& only_ids) {
  std::vector<const Dataset*> ptrs;
  for (const auto& [id, data] : parts) {
    if (only_ids.empty() ||
        std::binary_search(only_ids.begin(), only_ids.end(), id)) {
      ptrs.push_back(data);
    }
  }
  if (ptrs.empty()) throw std::invalid_argument("attack: no visible datasets");
  return concat_datasets(ptrs);
}

// Lead model plus M-1 copies offset by a norm-eps Gaussian direction. The
// copies are intentionally not projected so the collusion distance stays
// exactly eps.
std::vector<ClientUpdate> make_crafted(const ParamVector& lead, const AttackContext& ctx,
                                       double sigma, double eps, Rng& rng) {
  std::vector<ClientUpdate> crafted;
  crafted.reserve(ctx.compromised_ids.size());
  crafted.push_back({ctx.compromised_ids[0], lead, ctx.compromised_weights[0]});
  for (std::size_t i = 1; i < ctx.compromised_ids.size(); ++i) {
    ParamVector copy = lead + clipped_gaussian_direction(lead.size(), sigma, eps, rng);
    crafted.push_back({ctx.compromised_ids[i], copy, ctx.compromised_weights[i]});
  }
  return crafted;
}

// The models the attacker treats as the benign set when simulating the
// selection rule: the true benign uploads under full knowledge, its own
// honest compromised uploads (with placeholder ids) under partial knowledge.
std::vector<ClientUpdate> selection_pool_benign(const AttackContext& ctx) {
  std::vector<ClientUpdate> pool;
  if (ctx.level == KnowledgeLevel::kFull) {
    pool = ctx.visible_benign();
  } else if (ctx.level == KnowledgeLevel::kPartial) {
    pool = ctx.visible_compromised();
    int next_id = ctx.total_clients;
    for (ClientUpdate& u : pool) u.client_id = next_id++;
  } else {
    throw std::invalid_argument("attack: selection-based attacks need full or partial knowledge");
  }
  if (pool.empty()) throw std::invalid_argument("attack: no visible models to evaluate against");
  return pool;
}

struct SelectionCheck {
  std::vector<ClientUpdate> pool_benign;
  int assumed_m = 0;

  bool lead_selected(const std::vector<ClientUpdate>& crafted, int lead_id) const {
    std::vector<ClientUpdate> round = crafted;
    round.insert(round.end(), pool_benign.begin(), pool_benign.end());
    const int pool_size = static_cast<int>(round.size());
    if (pool_size < 3) {
      throw std::invalid_argument("attack: selection check needs at least 3 visible models");
    }
    // clamp so the simulated rule keeps at least one scored neighbor
    const int m_sim = std::max(0, std::min(assumed_m, pool_size - 3));
    auto outcome = aggregate_krum(round, m_sim);
    return outcome.selected_id && *outcome.selected_id == lead_id;
  }
};

SelectionCheck make_selection_check(const AttackContext& ctx) {
  if (!ctx.aggregation_known || ctx.aggregation_known->kind != RuleKind::kKrum) {
    throw std::invalid_argument("attack: the selection attack requires a known Krum rule");
  }
  return SelectionCheck{selection_pool_benign(ctx), ctx.aggregation_known->assumed_m};
}

void check_context(const AttackContext& ctx) {
  if (ctx.compromised_ids.empty()) throw std::invalid_argument("attack: M must be >= 1");
  if (ctx.compromised_ids.size() != ctx.compromised_weights.size()) {
    throw std::invalid_argument("attack: compromised ids and weights misaligned");
  }
  if (!std::is_sorted(ctx.compromised_ids.begin(), ctx.compromised_ids.end())) {
    throw std::invalid_argument("attack: compromised ids must be ascending");
  }
}

// next k-combination of indices in [0, n); returns false after the last one
bool next_combination(std::vector<int>& comb, int n) {
  const int k = static_cast<int>(comb.size());
  for (int i = k - 1; i >= 0; --i) {
    if (comb[static_cast<std::size_t>(i)] < n - k + i) {
      ++comb[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) {
        comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

std::string to_string(KnowledgeLevel level) {
  switch (level) {
    case KnowledgeLevel::kFull: return "full";
    case KnowledgeLevel::kPartial: return "partial";
    case KnowledgeLevel::kNone: return "none";
  }
  return "unknown";
}

std::string to_string(AlphaMethod method) {
  switch (method) {
    case AlphaMethod::kGreedy: return "greedy";
    case AlphaMethod::kExhaustive: return "exhaustive";
    case AlphaMethod::kRestarts: return "restarts";
  }
  return "unknown";
}

void validate_hyper(const AttackHyper& hyper) {
  if (!(hyper.eta0 > 0.0)) throw std::invalid_argument("attack hyper: eta0 must be positive");
  if (!(hyper.decay > 0.0 && hyper.decay < 1.0)) {
    throw std::invalid_argument("attack hyper: decay must lie in (0, 1)");
  }
  if (!(hyper.sigma > 0.0)) throw std::invalid_argument("attack hyper: sigma must be positive");
  if (!(hyper.eps > 0.0)) throw std::invalid_argument("attack hyper: eps must be positive");
  if (!(hyper.varsigma > 0.0)) throw std::invalid_argument("attack hyper: varsigma must be positive");
  if (hyper.max_iters < 0) throw std::invalid_argument("attack hyper: max_iters must be >= 0");
}

bool AttackContext::is_compromised(int id) const {
  return std::binary_search(compromised_ids.begin(), compromised_ids.end(), id);
}

std::vector<ClientUpdate> AttackContext::visible_benign() const {
  std::vector<ClientUpdate> out;
  for (const ClientUpdate& u : visible_updates) {
    if (!is_compromised(u.client_id)) out.push_back(u);
  }
  return out;
}

std::vector<ClientUpdate> AttackContext::visible_compromised() const {
  std::vector<ClientUpdate> out;
  for (const ClientUpdate& u : visible_updates) {
    if (is_compromised(u.client_id)) out.push_back(u);
  }
  return out;
}

Dataset AttackContext::visible_data_union() const { return union_of(visible_datasets, {}); }

Dataset AttackContext::compromised_data_union() const {
  return union_of(visible_datasets, sorted_copy(compromised_ids));
}

std::pair<double, ParamVector> attacker_objective(const ParamVector& params,
                                                  const AttackContext& ctx,
                                                  const ModelSpec& spec) {
  if (ctx.objective == AttackObjective::kTargeted) {
    if (!ctx.target) throw std::invalid_argument("attacker_objective: targeted mode needs a target");
    if (ctx.target->size() != params.size()) {
      throw std::invalid_argument("attacker_objective: target dim mismatch");
    }
    ParamVector diff = params - *ctx.target;
    return {diff.squaredNorm(), 2.0 * diff};
  }
  Dataset data = ctx.visible_data_union();
  return {-loss(spec, params, data), -loss_gradient(spec, params, data)};
}

std::vector<ClientUpdate> attack_gaussian(const AttackContext& ctx, double sigma, Rng& rng) {
  check_context(ctx);
  if (sigma < 0.0) throw std::invalid_argument("attack_gaussian: sigma must be >= 0");
  std::vector<ClientUpdate> honest = ctx.visible_compromised();
  if (honest.size() != ctx.compromised_ids.size()) {
    throw std::invalid_argument("attack_gaussian: honest compromised uploads missing from context");
  }
  std::vector<ClientUpdate> out;
  out.reserve(honest.size());
  for (const ClientUpdate& u : honest) {
    ParamVector noisy = u.params + rng.normal_vector(u.params.size(), sigma);
    out.push_back({u.client_id, project_box(noisy, ctx.domain), u.weight});
  }
  return out;
}

std::vector<ClientUpdate> attack_label_flip(const AttackContext& ctx, const LabelMap& map,
                                            const ModelSpec& spec, const TrainOptions& train,
                                            Rng& rng) {
  check_context(ctx);
  std::vector<ClientUpdate> out;
  for (std::size_t i = 0; i < ctx.compromised_ids.size(); ++i) {
    const int id = ctx.compromised_ids[i];
    const Dataset* data = nullptr;
    for (const auto& [vid, d] : ctx.visible_datasets) {
      if (vid == id) { data = d; break; }
    }
    if (!data) {
      throw std::invalid_argument("attack_label_flip: dataset of compromised client " +
                                  std::to_string(id) + " not in context");
    }
    Dataset flipped = flip_labels(*data, map);
    Rng client_rng = rng.substream(0x1f11, static_cast<std::uint64_t>(id));
    ParamVector trained = local_train(spec, ctx.global_model, flipped, train, client_rng);
    out.push_back({id, std::move(trained), ctx.compromised_weights[i]});
  }
  return out;
}

MeanAttackResult attack_mean_exact(const AttackContext& ctx) {
  check_context(ctx);
  if (ctx.level != KnowledgeLevel::kFull) {
    throw std::invalid_argument("attack_mean_exact: requires full knowledge");
  }
  if (!ctx.aggregation_known || ctx.aggregation_known->kind != RuleKind::kMean) {
    throw std::invalid_argument("attack_mean_exact: requires a known mean rule");
  }
  if (!ctx.target) throw std::invalid_argument("attack_mean_exact: requires a target");

  double s = 0.0;
  for (double w : ctx.compromised_weights) s += w;
  if (!(s > 0.0)) throw std::invalid_argument("attack_mean_exact: compromised weight mass is zero");

  ParamVector benign_sum = ParamVector::Zero(ctx.target->size());
  for (const ClientUpdate& u : ctx.visible_benign()) benign_sum += u.weight * u.params;

  ParamVector raw = (*ctx.target - benign_sum) / s;
  MeanAttackResult res;
  res.feasible = inside_box(raw, ctx.domain);
  ParamVector crafted = res.feasible ? raw : project_box(raw, ctx.domain);
  // when clipped, the aggregate misses the target by s * (projected - raw)
  res.predicted_objective = res.feasible ? 0.0 : (s * (crafted - raw)).squaredNorm();
  for (std::size_t i = 0; i < ctx.compromised_ids.size(); ++i) {
    res.updates.push_back({ctx.compromised_ids[i], crafted, ctx.compromised_weights[i]});
  }
  return res;
}

MeanAttackResult attack_mean_estimated(const AttackContext& ctx, MeanEstimator variant) {
  check_context(ctx);
  if (ctx.level != KnowledgeLevel::kPartial) {
    throw std::invalid_argument("attack_mean_estimated: requires partial knowledge");
  }
  if (!ctx.aggregation_known || ctx.aggregation_known->kind != RuleKind::kMean) {
    throw std::invalid_argument("attack_mean_estimated: requires a known mean rule");
  }
  if (!ctx.target) throw std::invalid_argument("attack_mean_estimated: requires a target");

  std::vector<ClientUpdate> honest = ctx.visible_compromised();
  if (honest.size() != ctx.compromised_ids.size()) {
    throw std::invalid_argument("attack_mean_estimated: honest compromised uploads missing");
  }
  double s = 0.0;
  ParamVector weighted_sum = ParamVector::Zero(ctx.target->size());
  for (const ClientUpdate& u : honest) {
    s += u.weight;
    weighted_sum += u.weight * u.params;
  }
  if (!(s > 0.0)) throw std::invalid_argument("attack_mean_estimated: compromised weight mass is zero");

  const double coef = variant == MeanEstimator::kOvershoot ? 2.0 / s - 1.0 : 1.0 - 1.0 / s;
  ParamVector raw = (*ctx.target + coef * weighted_sum) / s;

  MeanAttackResult res;
  res.predicted_objective = coef * coef * weighted_sum.squaredNorm();
  res.feasible = inside_box(raw, ctx.domain);
  ParamVector crafted = res.feasible ? raw : project_box(raw, ctx.domain);
  for (std::size_t i = 0; i < ctx.compromised_ids.size(); ++i) {
    res.updates.push_back({ctx.compromised_ids[i], crafted, ctx.compromised_weights[i]});
  }
  return res;
}

KrumAttackResult attack_krum_descent(const AttackContext& ctx, const AttackHyper& hyper,
                                     const ModelSpec& spec, Rng& rng) {
  check_context(ctx);
  validate_hyper(hyper);
  SelectionCheck check = make_selection_check(ctx);
  const int lead_id = ctx.compromised_ids[0];

  ParamVector lead = ctx.global_model;
  double eta = hyper.eta0;
  int iters = 0;
  std::vector<ClientUpdate> accepted_set;  // last crafted round that passed the check
  while (eta >= hyper.varsigma && iters < hyper.max_iters) {
    auto [value, grad] = attacker_objective(lead, ctx, spec);
    (void)value;
    ParamVector candidate = project_box(lead - eta * grad, ctx.domain);
    std::vector<ClientUpdate> crafted = make_crafted(candidate, ctx, hyper.sigma, hyper.eps, rng);
    bool selected = check.lead_selected(crafted, lead_id);
    ++iters;
    if (selected) {
      const bool moved = (candidate.array() != lead.array()).any();
      lead = candidate;
      accepted_set = std::move(crafted);
      if (!moved) break;  // accepted stationary point: nothing left to do
    } else {
      eta *= hyper.decay;  // revert the move, shrink the step
    }
  }

  KrumAttackResult res;
  // keep the collusion copies that passed the selection check with the final
  // lead; a fresh draw could flip a borderline selection
  res.updates = accepted_set.empty()
                    ? make_crafted(lead, ctx, hyper.sigma, hyper.eps, rng)
                    : std::move(accepted_set);
  res.selected = check.lead_selected(res.updates, lead_id);
  res.iterations = iters;
  return res;
}

double min_benign_score(const std::vector<ClientUpdate>& benign, int num_compromised) {
  const int b = static_cast<int>(benign.size());
  const int neighbors = b - 2;  // U - M - 2 with U = B + M
  (void)num_compromised;
  if (neighbors < 1) {
    throw std::invalid_argument("min_benign_score: need at least 3 benign models (got " +
                                std::to_string(b) + ")");
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> dists;
  for (int i = 0; i < b; ++i) {
    dists.clear();
    for (int j = 0; j < b; ++j) {
      if (j == i) continue;
      dists.push_back(euclidean_distance(benign[static_cast<std::size_t>(i)].params,
                                         benign[static_cast<std::size_t>(j)].params));
    }
    std::sort(dists.begin(), dists.end());
    double sum = 0.0;
    for (int k = 0; k < neighbors; ++k) sum += dists[static_cast<std::size_t>(k)];
    best = std::min(best, sum);
  }
  return best;
}

ParamVector constraint_sphere_init(const std::vector<ClientUpdate>& benign,
                                   const ParamVector& target, int num_compromised,
                                   int total_clients, double eps, double min_score) {
  const int b = static_cast<int>(benign.size());
  if (b < 1) throw std::invalid_argument("constraint_sphere_init: need at least one benign model");

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(target.size());
  double sum_sq = 0.0;
  for (const ClientUpdate& u : benign) {
    xi += u.params;
    sum_sq += u.params.squaredNorm();
  }
  const double bd = static_cast<double>(b);
  Eigen::VectorXd center = xi / bd;
  const double lambda_term =
      (static_cast<double>(total_clients - 2 * num_compromised - 2) +
       2.0 * (num_compromised - 1) * eps - 2.0 * min_score) /
      bd;
  const double r2 = xi.squaredNorm() / (bd * bd) - sum_sq / bd - lambda_term;
  if (r2 < 0.0) return center;

  Eigen::VectorXd dir = target - center;
  const double dist = dir.norm();
  if (dist == 0.0) return center;
  return center + dir * (std::sqrt(r2) / dist);
}

KktState solve_distance_kkt(const std::vector<int>& alpha,
                            const std::vector<ClientUpdate>& benign,
                            const ParamVector& target, int num_compromised, double eps,
                            double min_score, const ParamVector& init, double tol) {
  if (alpha.size() != benign.size()) {
    throw std::invalid_argument("solve_distance_kkt: alpha size mismatch");
  }
  std::vector<std::size_t> sel;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (alpha[j] != 0 && alpha[j] != 1) {
      throw std::invalid_argument("solve_distance_kkt: alpha entries must be 0/1");
    }
    if (alpha[j] == 1) sel.push_back(j);
  }
  if (sel.empty()) throw std::invalid_argument("solve_distance_kkt: alpha selects no models");
  if (!init.allFinite()) throw std::invalid_argument("solve_distance_kkt: init must be finite");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_distance_kkt: tol must be positive");

  const double margin = (num_compromised - 1) * eps;
  auto constraint = [&](const ParamVector& x) {
    double sum = 0.0;
    for (std::size_t j : sel) sum += euclidean_distance(x, benign[j].params);
    return sum + margin - min_score;
  };
  auto stationarity = [&](const ParamVector& x, double lambda) {
    ParamVector g = 2.0 * (x - target);
    for (std::size_t j : sel) {
      double d = std::max(euclidean_distance(x, benign[j].params), kDistanceFloor);
      g += lambda * (x - benign[j].params) / d;
    }
    return g.norm();
  };

  // slack constraint at the unconstrained optimum: done (complementary slackness)
  if (constraint(target) <= 0.0) return {target, 0.0, 0.0, 0.0};

  // inner solve: damped fixed point of the stationarity equation at fixed lambda
  auto solve_at = [&](double lambda, ParamVector x) {
    constexpr double kBeta = 0.7;
    for (int inner = 0; inner < 400; ++inner) {
      double denom = 2.0;
      ParamVector num = 2.0 * target;
      for (std::size_t j : sel) {
        double d = std::max(euclidean_distance(x, benign[j].params), kDistanceFloor);
        num += (lambda / d) * benign[j].params;
        denom += lambda / d;
      }
      ParamVector next = x + kBeta * (num / denom - x);
      double step = (next - x).norm();
      x = next;
      if (step <= 1e-15 * (1.0 + x.norm())) break;
    }
    return x;
  };

  // bracket the multiplier: constraint(theta(lambda)) decreases in lambda
  double lo = 0.0, hi = 1.0;
  ParamVector x = solve_at(hi, init);
  int doubling = 0;
  while (constraint(x) > 0.0) {
    lo = hi;
    hi *= 2.0;
    x = solve_at(hi, x);
    if (++doubling > 70) {
      std::ostringstream os;
      os << "solve_distance_kkt: constraint set looks empty (best residuals: stationarity="
         << stationarity(x, hi) << ", constraint=" << constraint(x) << ")";
      throw std::runtime_error(os.str());
    }
  }

  double lambda = hi;
  for (int iter = 0; iter < 240; ++iter) {
    double cons = constraint(x);
    double stat = stationarity(x, lambda);
    if (std::abs(cons) <= tol && stat <= tol) {
      return {x, lambda, stat, std::abs(cons)};
    }
    double mid = 0.5 * (lo + hi);
    x = solve_at(mid, x);
    if (constraint(x) > 0.0) lo = mid; else hi = mid;
    lambda = mid;
  }
  std::ostringstream os;
  os << "solve_distance_kkt: did not reach tol=" << tol
     << " (best residuals: stationarity=" << stationarity(x, lambda)
     << ", constraint=" << std::abs(constraint(x)) << ")";
  throw std::runtime_error(os.str());
}

SubsetConstraint select_alpha(const std::vector<ClientUpdate>& benign,
                              const ParamVector& target, int num_compromised,
                              int total_clients, double eps, AlphaMethod method, Rng& rng,
                              int restarts, std::optional<int> subset_size_override) {
  const int b = static_cast<int>(benign.size());
  const int subset_size = subset_size_override
                              ? *subset_size_override
                              : total_clients - 2 * num_compromised - 1;
  if (subset_size < 1 || subset_size > b) {
    throw std::invalid_argument("select_alpha: subset size " + std::to_string(subset_size) +
                                " infeasible for " + std::to_string(b) + " benign models");
  }

  SubsetConstraint out;
  out.eps = eps;
  out.min_score = min_benign_score(benign, num_compromised);
  out.benign_sum = Eigen::VectorXd::Zero(target.size());
  double sum_sq = 0.0;
  for (const ClientUpdate& u : benign) {
    out.benign_sum += u.params;
    sum_sq += u.params.squaredNorm();
  }
  out.lambda_term = (static_cast<double>(total_clients - 2 * num_compromised - 2) +
                     2.0 * (num_compromised - 1) * eps - 2.0 * out.min_score) /
                    static_cast<double>(b);

  // greedy pick: the subset_size models nearest the target
  std::vector<std::pair<double, int>> by_dist;
  for (int j = 0; j < b; ++j) {
    by_dist.emplace_back(euclidean_distance(benign[static_cast<std::size_t>(j)].params, target), j);
  }
  std::sort(by_dist.begin(), by_dist.end());
  auto subset_to_alpha = [&](const std::vector<int>& subset) {
    std::vector<int> a(static_cast<std::size_t>(b), 0);
    for (int j : subset) a[static_cast<std::size_t>(j)] = 1;
    return a;
  };
  std::vector<int> greedy;
  for (int k = 0; k < subset_size; ++k) greedy.push_back(by_dist[static_cast<std::size_t>(k)].second);
  std::sort(greedy.begin(), greedy.end());

  if (method == AlphaMethod::kGreedy || subset_size == b) {
    out.alpha = subset_to_alpha(greedy);
    return out;
  }

  const ParamVector init = constraint_sphere_init(benign, target, num_compromised,
                                                  total_clients, eps, out.min_score);
  auto objective_of = [&](const std::vector<int>& alpha) -> std::optional<double> {
    try {
      KktState st = solve_distance_kkt(alpha, benign, target, num_compromised, eps,
                                       out.min_score, init, 1e-7);
      return (st.iterate - target).squaredNorm();
    } catch (const std::runtime_error&) {
      return std::nullopt;  // infeasible subset
    }
  };

  std::vector<int> best_subset = greedy;
  std::optional<double> best_value = objective_of(subset_to_alpha(greedy));

  auto consider = [&](const std::vector<int>& subset) {
    auto value = objective_of(subset_to_alpha(subset));
    if (value && (!best_value || *value < *best_value)) {
      best_value = value;
      best_subset = subset;
    }
  };

  if (method == AlphaMethod::kExhaustive) {
    if (b > 12) {
      throw std::invalid_argument("select_alpha: exhaustive search allowed only for B <= 12");
    }
    std::vector<int> comb(static_cast<std::size_t>(subset_size));
    std::iota(comb.begin(), comb.end(), 0);
    do {
      consider(comb);
    } while (next_combination(comb, b));
  } else {  // kRestarts
    std::vector<int> indices(static_cast<std::size_t>(b));
    std::iota(indices.begin(), indices.end(), 0);
    for (int r = 0; r < restarts; ++r) {
      shuffle_in_place(indices, rng);
      std::vector<int> subset(indices.begin(), indices.begin() + subset_size);
      std::sort(subset.begin(), subset.end());
      consider(subset);
    }
  }

  out.alpha = subset_to_alpha(best_subset);
  return out;
}

KrumAttackResult attack_krum_kkt(const AttackContext& ctx, const AttackHyper& hyper,
                                 const ModelSpec& spec, Rng& rng, AlphaMethod method) {
  check_context(ctx);
  validate_hyper(hyper);
  (void)spec;
  if (!ctx.target) throw std::invalid_argument("attack_krum_kkt: requires a target");
  SelectionCheck check = make_selection_check(ctx);
  const std::vector<ClientUpdate>& benign = check.pool_benign;
  const int b = static_cast<int>(benign.size());
  const int m = ctx.num_compromised();

  const double e_floor = min_benign_score(benign, m);
  const int nominal = ctx.total_clients - 2 * m - 1;
  const int subset_size = std::max(1, std::min(nominal, b));
  const ParamVector init =
      constraint_sphere_init(benign, *ctx.target, m, ctx.total_clients, hyper.eps, e_floor);

  ParamVector lead;
  bool solved = false;
  try {
    SubsetConstraint sc = select_alpha(benign, *ctx.target, m, ctx.total_clients, hyper.eps,
                                       method, rng, hyper.restarts, subset_size);
    KktState st = solve_distance_kkt(sc.alpha, benign, *ctx.target, m, hyper.eps, e_floor,
                                     init, hyper.kkt_tol);
    lead = project_box(st.iterate, ctx.domain);
    solved = true;
  } catch (const std::runtime_error&) {
    // fall through to the anchored subset
  }

  if (!solved) {
    // anchor the subset at the model attaining the score floor; its nearest
    // subset_size peers keep the constraint satisfiable unless eps is huge
    int anchor = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < b; ++i) {
      std::vector<double> dists;
      for (int j = 0; j < b; ++j) {
        if (j != i) {
          dists.push_back(euclidean_distance(benign[static_cast<std::size_t>(i)].params,
                                             benign[static_cast<std::size_t>(j)].params));
        }
      }
      std::sort(dists.begin(), dists.end());
      double sum = 0.0;
      for (int k = 0; k < b - 2; ++k) sum += dists[static_cast<std::size_t>(k)];
      if (sum < best) { best = sum; anchor = i; }
    }
    std::vector<std::pair<double, int>> near;
    for (int j = 0; j < b; ++j) {
      near.emplace_back(euclidean_distance(benign[static_cast<std::size_t>(anchor)].params,
                                           benign[static_cast<std::size_t>(j)].params),
                        j);
    }
    std::sort(near.begin(), near.end());
    std::vector<int> alpha(static_cast<std::size_t>(b), 0);
    for (int k = 0; k < subset_size; ++k) {
      alpha[static_cast<std::size_t>(near[static_cast<std::size_t>(k)].second)] = 1;
    }
    try {
      KktState st = solve_distance_kkt(alpha, benign, *ctx.target, m, hyper.eps, e_floor,
                                       benign[static_cast<std::size_t>(anchor)].params,
                                       hyper.kkt_tol);
      lead = project_box(st.iterate, ctx.domain);
    } catch (const std::runtime_error&) {
      lead = benign[static_cast<std::size_t>(anchor)].params;  // mimic the central client
    }
  }

  KrumAttackResult res;
  res.updates = make_crafted(lead, ctx, hyper.sigma, hyper.eps, rng);
  res.selected = check.lead_selected(res.updates, ctx.compromised_ids[0]);
  res.iterations = 1;
  return res;
}

std::pair<std::vector<ClientUpdate>, BlindState> attack_blind_round(
    const BlindState& state, const BlindHyper& hyper, const AttackContext& ctx,
    const ModelSpec& spec, const LabelMap& map, Rng& rng) {
  check_context(ctx);
  if (ctx.level != KnowledgeLevel::kNone) {
    throw std::invalid_argument("attack_blind_round: requires the no-knowledge level");
  }
  if (!(hyper.growth > 1.0)) throw std::invalid_argument("attack_blind_round: growth must exceed 1");

  BlindState next = state;
  const bool accepted =
      state.prev_crafted &&
      euclidean_distance(*state.prev_crafted, ctx.global_model) <= hyper.xi;
  // a missing previous round counts as rejected
  next.eta = accepted ? state.eta * hyper.growth : state.eta / hyper.growth;
  next.eta = std::min(hyper.eta_max, std::max(hyper.eta_min, next.eta));

  Dataset flipped = flip_labels(ctx.compromised_data_union(), map);
  ParamVector grad = loss_gradient(spec, ctx.global_model, flipped);
  ParamVector lead = project_box(ctx.global_model - next.eta * grad, ctx.domain);

  std::vector<ClientUpdate> updates = make_crafted(lead, ctx, hyper.sigma, hyper.eps, rng);
  next.prev_crafted = std::move(lead);
  return std::make_pair(std::move(updates), std::move(next));
}

}  // namespace fedsim
