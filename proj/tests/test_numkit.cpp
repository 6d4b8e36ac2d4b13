#include "fedsim/numkit.hpp"

#include <doctest.h>

using namespace fedsim;

TEST_CASE("euclidean_distance basics") {
  Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
  CHECK(euclidean_distance(zero2, zero2) == 0.0);

  Eigen::VectorXd a(2), b(2);
  a << 3.0, 0.0;
  b << 0.0, 4.0;
  CHECK(euclidean_distance(a, b) == doctest::Approx(5.0));

  Eigen::VectorXd c(1), d(1);
  c << 0.1;
  d << 0.15;
  CHECK(euclidean_distance(c, d) == doctest::Approx(0.05));

  Eigen::VectorXd e(3);
  CHECK_THROWS_AS(euclidean_distance(a, e), std::invalid_argument);
}

TEST_CASE("euclidean_distance triangle inequality on random triples") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    auto dim = static_cast<Eigen::Index>(1 + rng.uniform_index(20));
    Eigen::VectorXd a = rng.normal_vector(dim, 3.0);
    Eigen::VectorXd b = rng.normal_vector(dim, 3.0);
    Eigen::VectorXd c = rng.normal_vector(dim, 3.0);
    double ab = euclidean_distance(a, b);
    double bc = euclidean_distance(b, c);
    double ac = euclidean_distance(a, c);
    CHECK(ac <= (ab + bc) * (1.0 + 1e-12));
    CHECK(ab == euclidean_distance(b, a));  // symmetry
  }
}

TEST_CASE("project_box clamps and is idempotent") {
  BoxDomain dom{-1.0, 1.0};

  Eigen::VectorXd v(1);
  v << 5.0;
  CHECK(project_box(v, dom)[0] == 1.0);

  v << 0.3;
  CHECK(project_box(v, dom)[0] == 0.3);

  Eigen::VectorXd w(3);
  w << -2.0, 0.0, 2.0;
  Eigen::VectorXd pw = project_box(w, dom);
  CHECK(pw[0] == -1.0);
  CHECK(pw[1] == 0.0);
  CHECK(pw[2] == 1.0);
  CHECK((project_box(pw, dom) - pw).norm() == 0.0);

  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x = rng.normal_vector(8, 2.0);
    Eigen::VectorXd once = project_box(x, dom);
    CHECK((project_box(once, dom) - once).norm() == 0.0);
    CHECK(inside_box(once, dom));
  }

  CHECK_THROWS_AS(project_box(v, BoxDomain{1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("clipped_gaussian_direction norm and determinism") {
  const double eps = 0.37;
  for (Eigen::Index dim : {1, 2, 17, 1000, 10000}) {
    Rng rng(99);
    Eigen::VectorXd v = clipped_gaussian_direction(dim, 1.5, eps, rng);
    CHECK(v.norm() == doctest::Approx(eps).epsilon(1e-12));
  }

  Rng r1(5), r2(5);
  Eigen::VectorXd a = clipped_gaussian_direction(64, 1.0, 1.0, r1);
  Eigen::VectorXd b = clipped_gaussian_direction(64, 1.0, 1.0, r2);
  CHECK((a - b).norm() == 0.0);

  // 1-D sphere has two points
  Rng r3(11);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd one = clipped_gaussian_direction(1, 1.0, 0.25, r3);
    CHECK(std::abs(one[0]) == doctest::Approx(0.25).epsilon(1e-12));
  }

  Rng r4(1);
  CHECK_THROWS_AS(clipped_gaussian_direction(0, 1.0, 1.0, r4), std::invalid_argument);
  CHECK_THROWS_AS(clipped_gaussian_direction(4, 0.0, 1.0, r4), std::invalid_argument);
  CHECK_THROWS_AS(clipped_gaussian_direction(4, 1.0, 0.0, r4), std::invalid_argument);
}

TEST_CASE("rng streams are reproducible and substreams independent") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  Rng base(9);
  Rng s1 = base.substream(1, 2);
  Rng s2 = base.substream(1, 2);
  CHECK(s1.uniform() == s2.uniform());

  // consuming the base stream does not change its substreams
  base.uniform();
  Rng s3 = base.substream(1, 2);
  Rng s4 = base.substream(1, 2);
  CHECK(s3.uniform() == s4.uniform());
  CHECK(base.substream(1, 2).seed() != base.substream(2, 1).seed());
}
