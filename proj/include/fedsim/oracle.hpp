#pragma once

#include "fedsim/aggregation.hpp"

#include <vector>

namespace fedsim::oracle {

/// Brute-force Krum selection: materializes the full pairwise-distance matrix
/// and picks neighbors/winner by explicit scans. Independent of the library's
/// aggregation path; used by tests and the `oracle` CLI subcommand.
int krum_select(const std::vector<ClientUpdate>& updates, int assumed_m);

std::vector<double> krum_scores(const std::vector<ClientUpdate>& updates, int assumed_m);

/// Sort-based trimmed mean computed coordinate by coordinate with insertion
/// into a scratch buffer.
Eigen::VectorXd trimmed_mean(const std::vector<ClientUpdate>& updates, int trim_k);

/// Minimum benign score by exhaustive subset enumeration (B <= 12): for every
/// benign model, every (B-2)-subset of its peers is summed.
double min_benign_score_exhaustive(const std::vector<ClientUpdate>& benign);

}  // namespace fedsim::oracle
