#include "fedsim/oracle.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fedsim::oracle {
namespace {

Eigen::MatrixXd distance_matrix(const std::vector<ClientUpdate>& updates) {
  const auto n = static_cast<Eigen::Index>(updates.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double acc = 0.0;
      const ParamVector& a = updates[static_cast<std::size_t>(i)].params;
      const ParamVector& b = updates[static_cast<std::size_t>(j)].params;
      for (Eigen::Index c = 0; c < a.size(); ++c) {
        double diff = a[c] - b[c];
        acc += diff * diff;
      }
      d(i, j) = std::sqrt(acc);
    }
  }
  return d;
}

}  // namespace

std::vector<double> krum_scores(const std::vector<ClientUpdate>& updates, int assumed_m) {
  const int n = static_cast<int>(updates.size());
  const int neighbors = n - assumed_m - 2;
  if (neighbors < 1) throw std::invalid_argument("oracle: U - m - 2 must be >= 1");

  Eigen::MatrixXd d = distance_matrix(updates);
  std::vector<double> scores(updates.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    // selection scan: repeatedly pick the unused peer with the smallest
    // (distance, client id) pair
    std::vector<bool> used(updates.size(), false);
    used[static_cast<std::size_t>(i)] = true;
    for (int pick = 0; pick < neighbors; ++pick) {
      int best = -1;
      for (int j = 0; j < n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        if (best == -1 || d(i, j) < d(i, best) ||
            (d(i, j) == d(i, best) &&
             updates[static_cast<std::size_t>(j)].client_id <
                 updates[static_cast<std::size_t>(best)].client_id)) {
          best = j;
        }
      }
      used[static_cast<std::size_t>(best)] = true;
      scores[static_cast<std::size_t>(i)] += d(i, best);
    }
  }
  return scores;
}

int krum_select(const std::vector<ClientUpdate>& updates, int assumed_m) {
  std::vector<double> scores = krum_scores(updates, assumed_m);
  int best = 0;
  for (int i = 1; i < static_cast<int>(updates.size()); ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto sb = static_cast<std::size_t>(best);
    if (scores[si] < scores[sb] ||
        (scores[si] == scores[sb] &&
         updates[si].client_id < updates[sb].client_id)) {
      best = i;
    }
  }
  return updates[static_cast<std::size_t>(best)].client_id;
}

Eigen::VectorXd trimmed_mean(const std::vector<ClientUpdate>& updates, int trim_k) {
  const int n = static_cast<int>(updates.size());
  if (n == 0) throw std::invalid_argument("oracle: empty round");
  if (trim_k < 0 || 2 * trim_k >= n) throw std::invalid_argument("oracle: need 2k < U");

  const Eigen::Index dim = updates.front().params.size();
  Eigen::VectorXd out(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    std::vector<double> sorted;
    for (const ClientUpdate& u : updates) {
      auto at = std::upper_bound(sorted.begin(), sorted.end(), u.params[c]);
      sorted.insert(at, u.params[c]);
    }
    double sum = 0.0;
    for (int i = trim_k; i < n - trim_k; ++i) sum += sorted[static_cast<std::size_t>(i)];
    out[c] = sum / static_cast<double>(n - 2 * trim_k);
  }
  return out;
}

double min_benign_score_exhaustive(const std::vector<ClientUpdate>& benign) {
  const int b = static_cast<int>(benign.size());
  if (b < 3) throw std::invalid_argument("oracle: need at least 3 benign models");
  if (b > 12) throw std::invalid_argument("oracle: exhaustive enumeration limited to B <= 12");
  const int subset = b - 2;

  Eigen::MatrixXd d = distance_matrix(benign);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < b; ++i) {
    std::vector<int> peers;
    for (int j = 0; j < b; ++j) {
      if (j != i) peers.push_back(j);
    }
    // enumerate subsets of peers of size `subset` via bitmask
    const int p = static_cast<int>(peers.size());
    for (unsigned mask = 0; mask < (1u << p); ++mask) {
      if (__builtin_popcount(mask) != subset) continue;
      double sum = 0.0;
      for (int k = 0; k < p; ++k) {
        if (mask & (1u << k)) sum += d(i, peers[static_cast<std::size_t>(k)]);
      }
      best = std::min(best, sum);
    }
  }
  return best;
}

}  // namespace fedsim::oracle
