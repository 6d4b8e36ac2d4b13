#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace fedsim {
namespace {

void check_round(const std::vector<ClientUpdate>& updates, bool check_weights) {
  if (updates.empty()) throw std::invalid_argument("aggregate: update list is empty");
  const Eigen::Index dim = updates.front().params.size();
  double weight_sum = 0.0;
  for (const ClientUpdate& u : updates) {
    if (u.params.size() != dim) {
      throw std::invalid_argument("aggregate: dimension mismatch (client " +
                                  std::to_string(u.client_id) + " has dim " +
                                  std::to_string(u.params.size()) + ", expected " +
                                  std::to_string(dim) + ")");
    }
    if (check_weights && !(u.weight > 0.0 && u.weight <= 1.0)) {
      throw std::invalid_argument("aggregate: weight of client " +
                                  std::to_string(u.client_id) + " outside (0, 1]");
    }
    weight_sum += u.weight;
  }
  if (check_weights && std::abs(weight_sum - 1.0) > 1e-12) {
    throw std::invalid_argument("aggregate: weights sum to " + std::to_string(weight_sum) +
                                ", expected 1 within 1e-12");
  }
}

}  // namespace

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::kMean: return "mean";
    case RuleKind::kKrum: return "krum";
    case RuleKind::kTrimmedMean: return "trimmed-mean";
  }
  return "unknown";
}

AggregationOutcome aggregate_mean(const std::vector<ClientUpdate>& updates) {
  check_round(updates, /*check_weights=*/true);
  AggregationOutcome out;
  out.global = ParamVector::Zero(updates.front().params.size());
  for (const ClientUpdate& u : updates) out.global += u.weight * u.params;
  return out;
}

double krum_score(std::size_t i, const std::vector<ClientUpdate>& updates, int assumed_m) {
  check_round(updates, /*check_weights=*/false);
  const int u_count = static_cast<int>(updates.size());
  const int neighbors = u_count - assumed_m - 2;
  if (neighbors < 1) {
    throw std::invalid_argument("krum: need U - m - 2 >= 1 (U=" + std::to_string(u_count) +
                                ", m=" + std::to_string(assumed_m) + ")");
  }
  if (i >= updates.size()) throw std::invalid_argument("krum_score: index out of range");

  std::vector<std::pair<double, int>> dists;  // (distance, client id)
  dists.reserve(updates.size() - 1);
  for (std::size_t j = 0; j < updates.size(); ++j) {
    if (j == i) continue;
    dists.emplace_back(euclidean_distance(updates[i].params, updates[j].params),
                       updates[j].client_id);
  }
  std::sort(dists.begin(), dists.end());
  double score = 0.0;
  for (int k = 0; k < neighbors; ++k) score += dists[static_cast<std::size_t>(k)].first;
  return score;
}

AggregationOutcome aggregate_krum(const std::vector<ClientUpdate>& updates, int assumed_m) {
  const int u_count = static_cast<int>(updates.size());
  AggregationOutcome out;
  if (assumed_m >= (u_count - 2) / 2.0) {
    out.warning = "krum: assumed m=" + std::to_string(assumed_m) +
                  " violates m < (U-2)/2 with U=" + std::to_string(u_count) +
                  "; selection guarantees do not hold";
  }

  std::vector<double> scores(updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i) scores[i] = krum_score(i, updates, assumed_m);

  std::size_t best = 0;
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (scores[i] < scores[best] ||
        (scores[i] == scores[best] && updates[i].client_id < updates[best].client_id)) {
      best = i;
    }
  }
  out.global = updates[best].params;  // exact copy of the winning upload
  out.selected_id = updates[best].client_id;
  out.scores = std::move(scores);
  return out;
}

AggregationOutcome aggregate_trimmed_mean(const std::vector<ClientUpdate>& updates,
                                          int trim_k) {
  check_round(updates, /*check_weights=*/false);
  const int u_count = static_cast<int>(updates.size());
  if (trim_k < 0) throw std::invalid_argument("trimmed-mean: trim_k must be >= 0");
  if (2 * trim_k >= u_count) {
    throw std::invalid_argument("trimmed-mean: need 2k < U (U=" + std::to_string(u_count) +
                                ", k=" + std::to_string(trim_k) + ")");
  }

  const Eigen::Index dim = updates.front().params.size();
  AggregationOutcome out;
  out.global.resize(dim);
  std::vector<double> column(updates.size());
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < updates.size(); ++i) column[i] = updates[i].params[c];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (int i = trim_k; i < u_count - trim_k; ++i) sum += column[static_cast<std::size_t>(i)];
    out.global[c] = sum / static_cast<double>(u_count - 2 * trim_k);
  }
  return out;
}

AggregationOutcome aggregate(const AggregationRule& rule,
                             const std::vector<ClientUpdate>& updates) {
  switch (rule.kind) {
    case RuleKind::kMean: return aggregate_mean(updates);
    case RuleKind::kKrum: return aggregate_krum(updates, rule.assumed_m);
    case RuleKind::kTrimmedMean: return aggregate_trimmed_mean(updates, rule.trim_k);
  }
  throw std::invalid_argument("aggregate: unknown rule");
}

}  // namespace fedsim
