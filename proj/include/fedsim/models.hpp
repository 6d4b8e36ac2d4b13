#pragma once

#include "fedsim/numkit.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fedsim {

enum class ModelKind { kLinearRegression, kLinearSvm, kMlp };

std::string to_string(ModelKind kind);

/// Architecture of a client model. The flat parameter count is a fixed
/// function of these fields.
struct ModelSpec {
  ModelKind kind = ModelKind::kLinearRegression;
  int input_dim = 1;
  int num_classes = 1;  // 1 for regression, 2 for the SVM
  int hidden_dim = 0;   // MLP only
};

/// Flat parameter count for a spec.
///
/// Linear models use [weights..., bias]. The MLP is one ReLU hidden layer
/// followed by softmax: [W1 (hidden x input, column-major), b1, W2
/// (classes x hidden, column-major), b2].
int param_count(const ModelSpec& spec);

void validate_spec(const ModelSpec& spec);

struct Dataset {
  Eigen::MatrixXd features;  // n x input_dim; finite, normalized inputs
  Eigen::VectorXd labels;    // class ids (integral values) or regression targets

  Eigen::Index size() const { return features.rows(); }
  int label_at(Eigen::Index i) const { return static_cast<int>(labels[i]); }
};

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows);
Dataset concat_datasets(const std::vector<const Dataset*>& parts);

struct TrainOptions {
  int epochs = 1;
  double lr = 0.1;
  int batch = 32;
  BoxDomain domain;  // parameters are projected here after every step
};

/// Zeros for the linear models; MLP weights uniform in
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)] with zero biases.
ParamVector init_params(const ModelSpec& spec, Rng& rng);

/// Mean per-example loss:
///  - linear regression: MSE divided by the label variance of `data`
///    (falls back to plain MSE when the variance is zero),
///  - SVM: hinge max(0, 1 - y f(x)) with y in {-1, +1} from labels {0, 1},
///  - MLP: cross-entropy of the softmax output.
/// The per-example reduction sums in sorted order, so the value is exactly
/// independent of dataset row order.
double loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

/// Analytic gradient of `loss`. Subgradient conventions: hinge at margin
/// exactly 1 contributes 0; ReLU at 0 contributes 0.
ParamVector loss_gradient(const ModelSpec& spec, const ParamVector& params,
                          const Dataset& data);

/// Mini-batch SGD from `start`, projected into opts.domain after every step.
/// epochs == 0 or lr == 0 returns `start` unchanged. Deterministic given rng.
ParamVector local_train(const ModelSpec& spec, const ParamVector& start,
                        const Dataset& data, const TrainOptions& opts, Rng& rng);

/// Predicted labels: argmax class for classifiers (ties resolve to the lower
/// class id; the SVM maps f(x) >= 0 to class 1), real value for regression.
Eigen::VectorXd predict(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& features);

}  // namespace fedsim
