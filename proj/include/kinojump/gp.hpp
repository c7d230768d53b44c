#pragma once

#include <Eigen/Cholesky>

#include <optional>
#include <stdexcept>
#include <vector>

#include "kinojump/dynamics.hpp"
#include "kinojump/types.hpp"

namespace kinojump {

/// Rational-quadratic kernel hyperparameters. One shared set serves the three
/// independent per-axis output GPs.
struct KernelHyper {
  double sigma_f = 1.0;              // signal std
  double sigma_n = 0.05;             // noise std (floored for conditioning)
  Vec3 length_scales{1.0, 1.0, 1.0};  // diagonal L, m/s
  double alpha = 1.0;                // scale-mixture exponent

  static constexpr double kSigmaNFloor = 1e-8;

  void validate() const {
    if (!(sigma_f > 0.0) || !(alpha > 0.0) || !(length_scales.minCoeff() > 0.0))
      throw std::invalid_argument("KernelHyper: hyperparameters must be positive");
    if (!(sigma_n >= kSigmaNFloor))
      throw std::invalid_argument("KernelHyper: sigma_n below conditioning floor");
  }
};

/// Scaled squared distance (z_i - z_j)^T L^-2 (z_i - z_j).
inline double kernel_dist_sq(const Vec3& zi, const Vec3& zj, const KernelHyper& h) {
  const Vec3 d = (zi - zj).cwiseQuotient(h.length_scales);
  return d.squaredNorm();
}

/// Rational quadratic kernel. The noise term contributes only when the two
/// features coincide; the Gram matrix in fit() applies the nugget by index
/// instead, which is what keeps duplicated data points well defined.
inline double kernel(const Vec3& zi, const Vec3& zj, const KernelHyper& h) {
  const double d2 = kernel_dist_sq(zi, zj, h);
  const double rq = h.sigma_f * h.sigma_f * std::pow(1.0 + d2 / (2.0 * h.alpha), -h.alpha);
  const bool same = (zi.array() == zj.array()).all();
  return same ? rq + h.sigma_n * h.sigma_n : rq;
}

inline double kernel_rq(const Vec3& zi, const Vec3& zj, const KernelHyper& h) {
  const double d2 = kernel_dist_sq(zi, zj, h);
  return h.sigma_f * h.sigma_f * std::pow(1.0 + d2 / (2.0 * h.alpha), -h.alpha);
}

/// Residual training set: body-frame velocity features against per-axis
/// residual accelerations.
struct GpDataset {
  std::vector<Vec3> inputs;   // m/s
  std::vector<Vec3> targets;  // m/s^2
  std::size_t max_points = 50;

  std::size_t size() const { return inputs.size(); }
};

struct IllConditionedKernel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GpPrediction {
  Vec3 mean = Vec3::Zero();      // m/s^2
  Vec3 variance = Vec3::Zero();  // per-axis posterior variance
};

/// Fitted model: cached Cholesky factor of (K + sigma_n^2 I) and per-axis
/// weight vectors, so prediction is O(n) per axis.
class GpModel {
 public:
  GpModel() = default;

  static GpModel fit(const GpDataset& dataset, const KernelHyper& hyper) {
    hyper.validate();
    const std::size_t n = dataset.size();
    if (n == 0) throw std::invalid_argument("GpModel::fit: empty dataset");
    if (dataset.targets.size() != n)
      throw std::invalid_argument("GpModel::fit: inputs/targets size mismatch");
    Eigen::MatrixXd K(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = kernel_rq(dataset.inputs[i], dataset.inputs[j], hyper);
        K(i, j) = v;
        K(j, i) = v;
      }
    K.diagonal().array() += hyper.sigma_n * hyper.sigma_n;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
      throw IllConditionedKernel("GpModel::fit: Cholesky factorization failed");
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    if (diag.minCoeff() * diag.minCoeff() < 1e-14 * diag.maxCoeff() * diag.maxCoeff())
      throw IllConditionedKernel("GpModel::fit: Gram matrix numerically singular");
    GpModel m;
    m.dataset_ = dataset;
    m.hyper_ = hyper;
    m.llt_ = std::move(llt);
    Eigen::MatrixXd Y(n, 3);
    for (std::size_t i = 0; i < n; ++i) Y.row(i) = dataset.targets[i].transpose();
    m.weights_ = m.llt_.solve(Y);
    m.fitted_ = true;
    return m;
  }

  bool fitted() const { return fitted_; }
  const GpDataset& dataset() const { return dataset_; }
  const KernelHyper& hyper() const { return hyper_; }

  GpPrediction predict(const Vec3& z) const {
    if (!fitted_) throw std::logic_error("GpModel::predict: model not fitted");
    const std::size_t n = dataset_.size();
    Eigen::VectorXd k_star(n);
    for (std::size_t i = 0; i < n; ++i) k_star(i) = kernel_rq(z, dataset_.inputs[i], hyper_);
    GpPrediction out;
    out.mean = (weights_.transpose() * k_star);
    const double prior = kernel_rq(z, z, hyper_) + hyper_.sigma_n * hyper_.sigma_n;
    const double var = prior - k_star.dot(llt_.solve(k_star));
    out.variance.setConstant(std::max(0.0, var));
    return out;
  }

  /// Sum over axes of the log marginal likelihood, used by the tuning grid.
  double log_evidence() const {
    if (!fitted_) throw std::logic_error("GpModel::log_evidence: model not fitted");
    const auto n = static_cast<double>(dataset_.size());
    const Eigen::VectorXd diag = llt_.matrixL().toDenseMatrix().diagonal();
    const double logdet_half = diag.array().log().sum();
    double total = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::VectorXd y(dataset_.size());
      for (std::size_t i = 0; i < dataset_.size(); ++i) y(i) = dataset_.targets[i](axis);
      total += -0.5 * y.dot(weights_.col(axis)) - logdet_half - 0.5 * n * std::log(2.0 * M_PI);
    }
    return total;
  }

 private:
  GpDataset dataset_;
  KernelHyper hyper_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd weights_;  // n x 3
  bool fitted_ = false;
};

/// One simulator transition used for residual extraction.
struct TrainingTuple {
  QuadState state;
  RotorInput input;
  Disturbance disturbance_estimate;
  QuadState next_state;
};

/// Greedy farthest-point downsampling in feature space; keeps the spread of
/// features maximal and is deterministic.
inline std::vector<std::size_t> farthest_point_subset(const std::vector<Vec3>& pts,
                                                      std::size_t k) {
  std::vector<std::size_t> chosen;
  if (pts.empty() || k == 0) return chosen;
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  std::size_t first = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - mean).squaredNorm();
    if (d > best) {
      best = d;
      first = i;
    }
  }
  chosen.push_back(first);
  std::vector<double> min_d(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) min_d[i] = (pts[i] - pts[first]).squaredNorm();
  while (chosen.size() < std::min(k, pts.size())) {
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (min_d[i] > far) {
        far = min_d[i];
        next = i;
      }
    chosen.push_back(next);
    for (std::size_t i = 0; i < pts.size(); ++i)
      min_d[i] = std::min(min_d[i], (pts[i] - pts[next]).squaredNorm());
  }
  return chosen;
}

/// Builds the residual dataset from logged transitions: the target is the
/// velocity prediction error of the nominal model (with the estimated
/// disturbance) divided by dt, the feature is the body-frame velocity.
inline GpDataset collect_training(const std::vector<TrainingTuple>& trajectory,
                                  const QuadParams& params, double dt,
                                  std::size_t max_points = 50) {
  if (!(dt > 0.0)) throw std::invalid_argument("collect_training: dt must be positive");
  GpDataset all;
  all.max_points = max_points;
  for (const TrainingTuple& t : trajectory) {
    const QuadState pred = rk4_step(t.state, t.input, t.disturbance_estimate, dt, params);
    const Vec3 residual = (t.next_state.velocity - pred.velocity) / dt;
    const Vec3 feature = t.state.attitude.conjugate() * t.state.velocity;
    all.inputs.push_back(feature);
    all.targets.push_back(residual);
  }
  if (all.size() <= max_points) return all;
  const std::vector<std::size_t> keep = farthest_point_subset(all.inputs, max_points);
  GpDataset out;
  out.max_points = max_points;
  for (std::size_t i : keep) {
    out.inputs.push_back(all.inputs[i]);
    out.targets.push_back(all.targets[i]);
  }
  return out;
}

}  // namespace kinojump
