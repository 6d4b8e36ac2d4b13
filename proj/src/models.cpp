#include "fedsim/models.hpp"

#include <algorithm>
#include <numeric>

namespace fedsim {
namespace {

// Sorted-order reduction: the mean is exactly independent of row order.
double mean_sorted(std::vector<double>& values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double label_variance(const Dataset& data) {
  const Eigen::Index n = data.size();
  std::vector<double> ys(data.labels.data(), data.labels.data() + n);
  double mean = mean_sorted(ys);
  std::vector<double> devs(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = data.labels[i] - mean;
    devs[static_cast<std::size_t>(i)] = d * d;
  }
  return mean_sorted(devs);
}

void check_dims(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  if (params.size() != param_count(spec)) {
    throw std::invalid_argument("models: parameter vector has dim " +
                                std::to_string(params.size()) + ", spec requires " +
                                std::to_string(param_count(spec)));
  }
  if (data.size() < 1) throw std::invalid_argument("models: dataset is empty");
  if (data.features.cols() != spec.input_dim) {
    throw std::invalid_argument("models: feature dim " + std::to_string(data.features.cols()) +
                                " does not match input_dim " + std::to_string(spec.input_dim));
  }
}

struct MlpView {
  Eigen::Map<const Eigen::MatrixXd> w1;  // hidden x input
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;  // classes x hidden
  Eigen::Map<const Eigen::VectorXd> b2;
};

MlpView mlp_view(const ModelSpec& spec, const ParamVector& params) {
  const int d = spec.input_dim, h = spec.hidden_dim, c = spec.num_classes;
  const double* p = params.data();
  return MlpView{
      Eigen::Map<const Eigen::MatrixXd>(p, h, d),
      Eigen::Map<const Eigen::VectorXd>(p + h * d, h),
      Eigen::Map<const Eigen::MatrixXd>(p + h * d + h, c, h),
      Eigen::Map<const Eigen::VectorXd>(p + h * d + h + c * h, c),
  };
}

// Row-wise stable log-sum-exp of the class scores.
double log_sum_exp(const Eigen::VectorXd& z) {
  double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinearRegression: return "linear-regression";
    case ModelKind::kLinearSvm: return "linear-svm";
    case ModelKind::kMlp: return "mlp";
  }
  return "unknown";
}

void validate_spec(const ModelSpec& spec) {
  if (spec.input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
  switch (spec.kind) {
    case ModelKind::kLinearRegression:
      if (spec.num_classes != 1)
        throw std::invalid_argument("model: linear-regression requires num_classes == 1");
      break;
    case ModelKind::kLinearSvm:
      if (spec.num_classes != 2)
        throw std::invalid_argument("model: linear-svm requires num_classes == 2");
      break;
    case ModelKind::kMlp:
      if (spec.num_classes < 2)
        throw std::invalid_argument("model: mlp requires num_classes >= 2");
      if (spec.hidden_dim < 1)
        throw std::invalid_argument("model: mlp requires hidden_dim >= 1");
      break;
  }
}

int param_count(const ModelSpec& spec) {
  validate_spec(spec);
  switch (spec.kind) {
    case ModelKind::kLinearRegression:
    case ModelKind::kLinearSvm:
      return spec.input_dim + 1;
    case ModelKind::kMlp:
      return spec.hidden_dim * spec.input_dim + spec.hidden_dim +
             spec.num_classes * spec.hidden_dim + spec.num_classes;
  }
  return 0;
}

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
    out.labels[static_cast<Eigen::Index>(i)] = data.labels[rows[i]];
  }
  return out;
}

Dataset concat_datasets(const std::vector<const Dataset*>& parts) {
  Eigen::Index n = 0;
  Eigen::Index cols = 0;
  for (const Dataset* p : parts) {
    if (p->size() == 0) continue;
    if (cols == 0) cols = p->features.cols();
    if (p->features.cols() != cols)
      throw std::invalid_argument("concat_datasets: feature dim mismatch");
    n += p->size();
  }
  Dataset out;
  out.features.resize(n, cols);
  out.labels.resize(n);
  Eigen::Index at = 0;
  for (const Dataset* p : parts) {
    if (p->size() == 0) continue;
    out.features.middleRows(at, p->size()) = p->features;
    out.labels.segment(at, p->size()) = p->labels;
    at += p->size();
  }
  return out;
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  const int dim = param_count(spec);
  ParamVector theta = ParamVector::Zero(dim);
  if (spec.kind != ModelKind::kMlp) return theta;

  const int d = spec.input_dim, h = spec.hidden_dim, c = spec.num_classes;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (int i = 0; i < h * d; ++i) theta[i] = rng.uniform(-bound1, bound1);
  const int w2_at = h * d + h;
  for (int i = 0; i < c * h; ++i) theta[w2_at + i] = rng.uniform(-bound2, bound2);
  return theta;
}

double loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  check_dims(spec, params, data);
  const Eigen::Index n = data.size();
  std::vector<double> per_example(static_cast<std::size_t>(n));

  switch (spec.kind) {
    case ModelKind::kLinearRegression: {
      Eigen::VectorXd pred =
          data.features * params.head(spec.input_dim) +
          Eigen::VectorXd::Constant(n, params[spec.input_dim]);
      for (Eigen::Index i = 0; i < n; ++i) {
        double r = pred[i] - data.labels[i];
        per_example[static_cast<std::size_t>(i)] = r * r;
      }
      double var = label_variance(data);
      double norm = var > 0.0 ? var : 1.0;
      return mean_sorted(per_example) / norm;
    }
    case ModelKind::kLinearSvm: {
      Eigen::VectorXd f =
          data.features * params.head(spec.input_dim) +
          Eigen::VectorXd::Constant(n, params[spec.input_dim]);
      for (Eigen::Index i = 0; i < n; ++i) {
        double y = 2.0 * data.labels[i] - 1.0;
        per_example[static_cast<std::size_t>(i)] = std::max(0.0, 1.0 - y * f[i]);
      }
      return mean_sorted(per_example);
    }
    case ModelKind::kMlp: {
      MlpView v = mlp_view(spec, params);
      Eigen::MatrixXd z1 = data.features * v.w1.transpose();
      z1.rowwise() += v.b1.transpose();
      Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
      Eigen::MatrixXd z2 = a1 * v.w2.transpose();
      z2.rowwise() += v.b2.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd z = z2.row(i);
        per_example[static_cast<std::size_t>(i)] = log_sum_exp(z) - z[data.label_at(i)];
      }
      return mean_sorted(per_example);
    }
  }
  return 0.0;
}

ParamVector loss_gradient(const ModelSpec& spec, const ParamVector& params,
                          const Dataset& data) {
  check_dims(spec, params, data);
  const Eigen::Index n = data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  ParamVector grad = ParamVector::Zero(params.size());

  switch (spec.kind) {
    case ModelKind::kLinearRegression: {
      Eigen::VectorXd r =
          data.features * params.head(spec.input_dim) +
          Eigen::VectorXd::Constant(n, params[spec.input_dim]) - data.labels;
      double var = label_variance(data);
      double scale = 2.0 * inv_n / (var > 0.0 ? var : 1.0);
      grad.head(spec.input_dim) = scale * (data.features.transpose() * r);
      grad[spec.input_dim] = scale * r.sum();
      return grad;
    }
    case ModelKind::kLinearSvm: {
      Eigen::VectorXd f =
          data.features * params.head(spec.input_dim) +
          Eigen::VectorXd::Constant(n, params[spec.input_dim]);
      for (Eigen::Index i = 0; i < n; ++i) {
        double y = 2.0 * data.labels[i] - 1.0;
        if (1.0 - y * f[i] > 0.0) {  // margin exactly 1 contributes 0
          grad.head(spec.input_dim) -= inv_n * y * data.features.row(i).transpose();
          grad[spec.input_dim] -= inv_n * y;
        }
      }
      return grad;
    }
    case ModelKind::kMlp: {
      const int d = spec.input_dim, h = spec.hidden_dim, c = spec.num_classes;
      MlpView v = mlp_view(spec, params);
      Eigen::MatrixXd z1 = data.features * v.w1.transpose();
      z1.rowwise() += v.b1.transpose();
      Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
      Eigen::MatrixXd z2 = a1 * v.w2.transpose();
      z2.rowwise() += v.b2.transpose();

      // softmax minus one-hot, scaled by 1/n
      Eigen::MatrixXd d2(n, c);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd z = z2.row(i);
        Eigen::VectorXd p = (z.array() - log_sum_exp(z)).exp();
        p[data.label_at(i)] -= 1.0;
        d2.row(i) = inv_n * p.transpose();
      }
      Eigen::MatrixXd d1 =
          (d2 * v.w2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());

      double* g = grad.data();
      Eigen::Map<Eigen::MatrixXd>(g, h, d) = d1.transpose() * data.features;
      Eigen::Map<Eigen::VectorXd>(g + h * d, h) = d1.colwise().sum().transpose();
      Eigen::Map<Eigen::MatrixXd>(g + h * d + h, c, h) = d2.transpose() * a1;
      Eigen::Map<Eigen::VectorXd>(g + h * d + h + c * h, c) =
          d2.colwise().sum().transpose();
      return grad;
    }
  }
  return grad;
}

ParamVector local_train(const ModelSpec& spec, const ParamVector& start,
                        const Dataset& data, const TrainOptions& opts, Rng& rng) {
  check_dims(spec, start, data);
  if (opts.epochs <= 0 || opts.lr == 0.0) return start;
  if (opts.lr < 0.0) throw std::invalid_argument("local_train: lr must be non-negative");

  const Eigen::Index n = data.size();
  const Eigen::Index batch =
      std::min<Eigen::Index>(std::max(1, opts.batch), n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  ParamVector theta = start;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    for (Eigen::Index at = 0; at < n; at += batch) {
      Eigen::Index len = std::min(batch, n - at);
      std::vector<Eigen::Index> rows(order.begin() + at, order.begin() + at + len);
      Dataset mini = take_rows(data, rows);
      theta = project_box(theta - opts.lr * loss_gradient(spec, theta, mini), opts.domain);
    }
  }
  return theta;
}

Eigen::VectorXd predict(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::MatrixXd& features) {
  if (params.size() != param_count(spec)) {
    throw std::invalid_argument("predict: parameter dim mismatch");
  }
  if (features.cols() != spec.input_dim) {
    throw std::invalid_argument("predict: feature dim mismatch");
  }
  const Eigen::Index n = features.rows();
  Eigen::VectorXd out(n);

  switch (spec.kind) {
    case ModelKind::kLinearRegression:
      out = features * params.head(spec.input_dim) +
            Eigen::VectorXd::Constant(n, params[spec.input_dim]);
      return out;
    case ModelKind::kLinearSvm: {
      Eigen::VectorXd f = features * params.head(spec.input_dim) +
                          Eigen::VectorXd::Constant(n, params[spec.input_dim]);
      for (Eigen::Index i = 0; i < n; ++i) out[i] = f[i] >= 0.0 ? 1.0 : 0.0;
      return out;
    }
    case ModelKind::kMlp: {
      MlpView v = mlp_view(spec, params);
      Eigen::MatrixXd z1 = features * v.w1.transpose();
      z1.rowwise() += v.b1.transpose();
      Eigen::MatrixXd z2 = (z1.cwiseMax(0.0)) * v.w2.transpose();
      z2.rowwise() += v.b2.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        for (int j = 1; j < spec.num_classes; ++j) {
          if (z2(i, j) > z2(i, best)) best = j;  // ties keep the lower class id
        }
        out[i] = best;
      }
      return out;
    }
  }
  return out;
}

}  // namespace fedsim
