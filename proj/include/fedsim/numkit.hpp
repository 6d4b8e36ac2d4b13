#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedsim {

/// Flat model-parameter vector. Every aggregation rule and attack operates on
/// these; entries are finite 64-bit reals.
using ParamVector = Eigen::VectorXd;

/// Axis-aligned feasible domain for model parameters: each coordinate is
/// clamped into [lo, hi].
struct BoxDomain {
  double lo = -10.0;
  double hi = 10.0;
};

/// Deterministic random stream.
///
/// Engine: std::mt19937_64 (bit-exact per the C++ standard). Derived values
/// are produced without std:: distributions, whose output is
/// implementation-defined: uniforms take the top 53 bits of the raw draw,
/// normals use Box-Muller (two uniforms per draw, no cached spare). Identical
/// seed plus identical call sequence gives identical output streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  /// Standard normal draw (Box-Muller).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  Eigen::VectorXd normal_vector(Eigen::Index dim, double sigma) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = sigma * normal();
    return v;
  }

  /// Independent stream derived from the construction seed and two tags,
  /// e.g. (round, client id). Does not depend on how much of this stream has
  /// been consumed.
  Rng substream(std::uint64_t a, std::uint64_t b) const {
    return Rng(mix64(seed_ + mix64(a + mix64(b ^ 0x9e3779b97f4a7c15ull))));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  // splitmix64 finalizer
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng (std::shuffle is implementation-defined).
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
  }
}

/// ||a - b||_2. Dimensions must match.
template <typename DerivedA, typename DerivedB>
double euclidean_distance(const Eigen::MatrixBase<DerivedA>& a,
                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("euclidean_distance: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  return (a.derived() - b.derived()).norm();
}

/// Coordinate-wise clamp into dom. Idempotent; interior points pass through
/// unchanged.
template <typename Derived>
Eigen::VectorXd project_box(const Eigen::MatrixBase<Derived>& v, const BoxDomain& dom) {
  if (!(dom.lo <= dom.hi)) {
    throw std::invalid_argument("project_box: lo must not exceed hi");
  }
  return v.derived().cwiseMax(dom.lo).cwiseMin(dom.hi);
}

template <typename Derived>
bool inside_box(const Eigen::MatrixBase<Derived>& v, const BoxDomain& dom) {
  return (v.derived().array() >= dom.lo).all() && (v.derived().array() <= dom.hi).all();
}

/// Vector of norm exactly eps whose direction is sampled from an isotropic
/// Gaussian with standard deviation sigma. A zero-norm sample (probability
/// zero) is redrawn.
Eigen::VectorXd clipped_gaussian_direction(Eigen::Index dim, double sigma, double eps,
                                           Rng& rng);

}  // namespace fedsim
