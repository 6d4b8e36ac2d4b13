#include "fedsim/aggregation.hpp"
#include "fedsim/oracle.hpp"

#include <doctest.h>

using namespace fedsim;

namespace {

std::vector<ClientUpdate> one_dim(const std::vector<double>& values) {
  std::vector<ClientUpdate> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Eigen::VectorXd v(1);
    v << values[i];
    out.push_back({static_cast<int>(i), v, 1.0 / static_cast<double>(values.size())});
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate_mean worked values and errors") {
  auto u = one_dim({0.0, 2.0});
  CHECK(aggregate_mean(u).global[0] == doctest::Approx(1.0));
  CHECK(!aggregate_mean(u).selected_id.has_value());

  auto w = one_dim({0.0, 4.0});
  w[0].weight = 0.25;
  w[1].weight = 0.75;
  CHECK(aggregate_mean(w).global[0] == doctest::Approx(3.0));

  // convexity fixed point: identical vectors aggregate to themselves
  auto same = one_dim({1.5, 1.5, 1.5});
  same[0].weight = 0.2;
  same[1].weight = 0.5;
  same[2].weight = 0.3;
  CHECK(aggregate_mean(same).global[0] == doctest::Approx(1.5));

  CHECK_THROWS_AS(aggregate_mean({}), std::invalid_argument);

  auto bad = one_dim({0.0, 1.0});
  bad[0].weight = 0.9;  // sum 1.4
  CHECK_THROWS_AS(aggregate_mean(bad), std::invalid_argument);

  auto mismatched = one_dim({0.0, 1.0});
  mismatched[1].params = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(aggregate_mean(mismatched), std::invalid_argument);
}

TEST_CASE("aggregate_mean is linear in the updates") {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClientUpdate> u;
    int n = 3 + static_cast<int>(rng.uniform_index(5));
    double wsum = 0.0;
    std::vector<double> raw;
    for (int i = 0; i < n; ++i) {
      raw.push_back(rng.uniform(0.1, 1.0));
      wsum += raw.back();
    }
    for (int i = 0; i < n; ++i) {
      u.push_back({i, rng.normal_vector(4, 2.0), raw[static_cast<std::size_t>(i)] / wsum});
    }
    double a = rng.uniform(-3.0, 3.0);
    std::vector<ClientUpdate> scaled = u;
    for (ClientUpdate& s : scaled) s.params *= a;
    Eigen::VectorXd lhs = aggregate_mean(scaled).global;
    Eigen::VectorXd rhs = a * aggregate_mean(u).global;
    CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("krum_score worked example") {
  // U=5, m=1: each score sums the two nearest neighbors
  auto u = one_dim({0.0, 0.1, 0.2, 5.0, 0.15});
  CHECK(krum_score(4, u, 1) == doctest::Approx(0.10));   // client holding 0.15
  CHECK(krum_score(3, u, 1) == doctest::Approx(9.65));   // 4.8 + 4.85
  CHECK(krum_score(0, u, 1) == doctest::Approx(0.25));
  CHECK(krum_score(1, u, 1) == doctest::Approx(0.15));
  CHECK(krum_score(2, u, 1) == doctest::Approx(0.15));

  auto outcome = aggregate_krum(u, 1);
  CHECK(*outcome.selected_id == 4);
  CHECK(outcome.global[0] == 0.15);

  // all identical: every score 0, tie-break to client 0
  auto same = one_dim({2.0, 2.0, 2.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(krum_score(i, same, 0) == 0.0);
  CHECK(*aggregate_krum(same, 0).selected_id == 0);

  CHECK_THROWS_AS(krum_score(0, one_dim({1.0, 2.0, 3.0}), 1), std::invalid_argument);
}

TEST_CASE("krum output is an input vector bitwise and warns past the bound") {
  Rng rng(9);
  std::vector<ClientUpdate> u;
  for (int i = 0; i < 6; ++i) u.push_back({i, rng.normal_vector(5, 1.0), 1.0 / 6.0});
  auto outcome = aggregate_krum(u, 1);
  bool found = false;
  for (const ClientUpdate& c : u) {
    if ((c.params - outcome.global).norm() == 0.0) found = true;
  }
  CHECK(found);
  CHECK(!outcome.warning.has_value());  // 1 < (6-2)/2

  auto warned = aggregate_krum(u, 2);  // 2 >= (6-2)/2
  CHECK(warned.warning.has_value());
}

TEST_CASE("krum matches the brute-force oracle on random instances") {
  Rng rng(123);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_index(5));  // U <= 8
    const auto dim = static_cast<Eigen::Index>(1 + rng.uniform_index(5));
    std::vector<ClientUpdate> u;
    for (int i = 0; i < n; ++i) u.push_back({i, rng.normal_vector(dim, 1.0), 1.0 / n});
    const int m = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - 2)));
    auto outcome = aggregate_krum(u, m);
    CHECK(*outcome.selected_id == oracle::krum_select(u, m));
  }
}

TEST_CASE("krum selection is invariant under list permutation (distinct scores)") {
  Rng rng(321);
  int checked = 0;
  while (checked < 50) {
    std::vector<ClientUpdate> u;
    for (int i = 0; i < 6; ++i) u.push_back({i, rng.normal_vector(3, 1.0), 1.0 / 6.0});
    auto base = aggregate_krum(u, 1);
    // only assert on score-distinct instances
    std::vector<double> s = *base.scores;
    std::sort(s.begin(), s.end());
    bool distinct = true;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i] == s[i - 1]) distinct = false;
    }
    if (!distinct) continue;
    ++checked;
    std::vector<std::size_t> order = {3, 0, 5, 1, 4, 2};
    std::vector<ClientUpdate> permuted;
    for (std::size_t i : order) permuted.push_back(u[i]);
    CHECK(*aggregate_krum(permuted, 1).selected_id == *base.selected_id);
  }
}

TEST_CASE("trimmed mean worked values, oracle equality, permutation invariance") {
  auto u = one_dim({1.0, 2.0, 3.0, 4.0, 100.0});
  CHECK(aggregate_trimmed_mean(u, 1).global[0] == doctest::Approx(3.0));

  // k = 0 is the unweighted mean
  CHECK(aggregate_trimmed_mean(u, 0).global[0] == doctest::Approx(110.0 / 5.0));

  auto same = one_dim({7.0, 7.0, 7.0, 7.0, 7.0});
  for (int k = 0; k < 3; ++k) CHECK(aggregate_trimmed_mean(same, k).global[0] == 7.0);

  CHECK_THROWS_AS(aggregate_trimmed_mean(u, 3), std::invalid_argument);

  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(8));
    const auto dim = static_cast<Eigen::Index>(1 + rng.uniform_index(6));
    std::vector<ClientUpdate> v;
    for (int i = 0; i < n; ++i) v.push_back({i, rng.normal_vector(dim, 2.0), 1.0 / n});
    const int k = static_cast<int>(rng.uniform_index(static_cast<std::size_t>((n - 1) / 2 + 1)));
    Eigen::VectorXd fast = aggregate_trimmed_mean(v, k).global;
    CHECK((fast - oracle::trimmed_mean(v, k)).norm() == 0.0);

    std::vector<ClientUpdate> permuted(v.rbegin(), v.rend());
    CHECK((aggregate_trimmed_mean(permuted, k).global - fast).norm() == 0.0);
  }
}
