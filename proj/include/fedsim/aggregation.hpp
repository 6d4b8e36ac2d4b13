#pragma once

#include "fedsim/numkit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fedsim {

enum class RuleKind { kMean, kKrum, kTrimmedMean };

std::string to_string(RuleKind kind);

struct AggregationRule {
  RuleKind kind = RuleKind::kMean;
  int assumed_m = 0;  // Krum: the server's assumed number of compromised clients
  int trim_k = 0;     // Trimmed mean: values dropped per side per coordinate
};

/// One client's upload for a round.
struct ClientUpdate {
  int client_id = 0;
  ParamVector params;
  double weight = 1.0;  // p_i in (0, 1]; all weights of a round sum to 1
};

struct AggregationOutcome {
  ParamVector global;
  std::optional<int> selected_id;              // Krum: the winning client id
  std::optional<std::vector<double>> scores;   // Krum: per-update scores, list order
  std::optional<std::string> warning;          // e.g. Krum validity bound violated
};

/// Weighted mean sum(p_i theta_i). Requires consistent dims and weights
/// summing to 1 within 1e-12.
AggregationOutcome aggregate_mean(const std::vector<ClientUpdate>& updates);

/// Sum of Euclidean distances from updates[i] to its U - assumed_m - 2 nearest
/// other updates (nearest by distance, ties to the lower client id). `i` is a
/// position in the list. Requires U - assumed_m - 2 >= 1.
double krum_score(std::size_t i, const std::vector<ClientUpdate>& updates, int assumed_m);

/// Selects the update with the smallest score (ties to the lowest client id)
/// and copies its parameters exactly. Emits a warning, not an error, when
/// assumed_m >= (U - 2) / 2, where the rule's guarantees no longer hold.
AggregationOutcome aggregate_krum(const std::vector<ClientUpdate>& updates, int assumed_m);

/// Per coordinate, drops the trim_k largest and trim_k smallest client values
/// and averages the rest with uniform weight. Requires 2 * trim_k < U.
AggregationOutcome aggregate_trimmed_mean(const std::vector<ClientUpdate>& updates,
                                          int trim_k);

AggregationOutcome aggregate(const AggregationRule& rule,
                             const std::vector<ClientUpdate>& updates);

}  // namespace fedsim
