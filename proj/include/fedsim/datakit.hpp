#pragma once

#include "fedsim/models.hpp"
#include "fedsim/numkit.hpp"

#include <string>
#include <vector>

namespace fedsim {

/// Assignment of example indices to clients with the induced aggregation
/// weights p_i = |D_i| / |D|. Assignments are disjoint and cover the dataset.
struct Partition {
  std::vector<std::vector<Eigen::Index>> assignments;
  std::vector<double> weights;

  int num_clients() const { return static_cast<int>(assignments.size()); }
};

/// Total map from class id to class id over [0, num_classes).
struct LabelMap {
  std::vector<int> to;

  int num_classes() const { return static_cast<int>(to.size()); }
  int apply(int label) const {
    if (label < 0 || label >= num_classes())
      throw std::invalid_argument("LabelMap: label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(num_classes()) + ")");
    return to[static_cast<std::size_t>(label)];
  }
};

LabelMap identity_map(int num_classes);

/// l -> (l - 1) mod num_classes; the cyclic relabeling used by targeted runs.
LabelMap decrement_map(int num_classes);

LabelMap inverse_map(const LabelMap& map);  // requires a bijection

struct RegressionData {
  Dataset data;
  ParamVector generating_params;  // [w*; b*], matches the linear-regression layout
};

/// y = w*.x + b* + N(0, noise_sigma); features uniform in [0,1]^d,
/// w* and b* uniform in [-1,1]. The generating parameters are recorded for
/// oracle checks.
RegressionData gen_regression(Eigen::Index n, int d, double noise_sigma, Rng& rng);

/// Gaussian blobs (unit std) at hypercube-corner centers scaled by
/// `separation`, one corner per class, then min-max normalized to [0,1] per
/// feature. Labels are balanced within +-1; rows are shuffled.
Dataset gen_classification(Eigen::Index n, int d, int num_classes, double separation,
                           Rng& rng);

/// Reads the big-endian IDX pair (magic 0x00000803 images / 0x00000801
/// labels). Pixels are scaled to [0,1]. Malformed input raises errors naming
/// the file and byte offset; no partial dataset is returned.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& data, int rows, int cols);

/// Plain numeric CSV: first row is a header, '.' decimal point, the last
/// column is the target/label. Any preprocessing (one-hot encoding,
/// normalization) is the caller's job.
Dataset load_csv(const std::string& path);

/// Non-i.i.d. split: clients are grouped round-robin into num_classes groups
/// (client k belongs to group k mod num_classes); each example of class l
/// goes to a uniform client of group l with probability p, otherwise to a
/// uniform client overall. p=0 is the i.i.d. split, p=1 keeps every class on
/// its home group.
Partition partition_noniid(const Dataset& data, int num_clients, double p,
                           int num_classes, Rng& rng);

/// Uniform i.i.d. split (used for regression data, where class groups do not
/// apply).
Partition partition_uniform(const Dataset& data, int num_clients, Rng& rng);

/// Features unchanged, every label replaced by map(label).
Dataset flip_labels(const Dataset& data, const LabelMap& map);

/// Binary relabeling by class parity: label l -> l mod 2.
Dataset to_parity_labels(const Dataset& data);

}  // namespace fedsim
