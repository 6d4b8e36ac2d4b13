#include "fedsim/numkit.hpp"

namespace fedsim {

Eigen::VectorXd clipped_gaussian_direction(Eigen::Index dim, double sigma, double eps,
                                           Rng& rng) {
  if (dim < 1) throw std::invalid_argument("clipped_gaussian_direction: dim must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("clipped_gaussian_direction: sigma must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("clipped_gaussian_direction: eps must be positive");

  Eigen::VectorXd n;
  double norm = 0.0;
  do {
    n = rng.normal_vector(dim, sigma);
    norm = n.norm();
  } while (norm == 0.0);
  return n * (eps / norm);
}

}  // namespace fedsim
