#pragma once

// Tikhonov-regularized least squares for the NG-RC readout.
//
// Minimizes ||Phi W^T - Y||^2 + alpha ||W||^2 over the training rows, where
// Phi stacks total feature vectors row-wise. The regularized normal equations
// (Phi^T Phi + alpha I) W^T = Phi^T Y are solved by Cholesky. When alpha is
// zero, or the normal matrix has condition number above 1e12, the problem is
// solved instead as a stacked least-squares system with a rank-revealing
// (complete orthogonal) decomposition, which returns the minimum-norm solution
// when rank deficient. Either fallback is flagged in the diagnostics.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "ngrc_control/model.hpp"

namespace ngrc {

/// Aligned samples, one per row. Rows [0, train_size) are the training split;
/// the remainder is the test split. targets.row(i) is the controlled output
/// one step after (states.row(i), perturbations.row(i)).
template <typename Scalar>
struct TrainingDataset {
  MatrixX<Scalar> states;         ///< N x d_lin
  MatrixX<Scalar> perturbations;  ///< N x d
  MatrixX<Scalar> targets;        ///< N x d
  Eigen::Index train_size = 0;

  [[nodiscard]] Eigen::Index size() const { return states.rows(); }
  [[nodiscard]] Eigen::Index test_size() const { return size() - train_size; }

  void validate(const FeatureConfig& cfg) const {
    if (perturbations.rows() != size() || targets.rows() != size()) {
      throw ConfigurationError("dataset sequences have unequal length");
    }
    if (states.cols() != cfg.d_lin) throw ConfigurationError("dataset state width != d_lin");
    if (perturbations.cols() != cfg.d || targets.cols() != cfg.d) {
      throw ConfigurationError("dataset control/target width != d");
    }
    if (train_size < 1 || train_size > size()) {
      throw ConfigurationError("training split must hold at least one row");
    }
  }
};

using Dataset = TrainingDataset<double>;

inline constexpr double kMaxRidgeCondition = 1e12;
inline constexpr double kMinEffectiveness = 1e-12;

/// Feature matrix for rows [first, first + count) of the dataset.
template <typename Scalar>
MatrixX<Scalar> feature_matrix(const TrainingDataset<Scalar>& data, Eigen::Index first,
                               Eigen::Index count, const FeatureConfig& cfg) {
  MatrixX<Scalar> phi(count, cfg.d_tot());
  for (Eigen::Index i = 0; i < count; ++i) {
    phi.row(i) = assemble_features(data.perturbations.row(first + i).transpose(),
                                   data.states.row(first + i).transpose(), cfg)
                     .transpose();
  }
  return phi;
}

/// True when the control-effectiveness block can be inverted.
template <typename Scalar>
bool effectiveness_invertible(const MatrixX<Scalar>& w_u) {
  if (w_u.size() == 1) return std::abs(w_u(0, 0)) >= kMinEffectiveness;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(w_u);
  return svd.singularValues().minCoeff() >= kMinEffectiveness;
}

struct TrainOptions {
  /// Throw TrainingError when w_u comes out singular. Disable to inspect
  /// degenerate fits (e.g. all-zero targets) that can never drive a controller.
  bool require_invertible_effectiveness = true;
};

template <typename Scalar>
NgrcModel<Scalar> train_ridge(const TrainingDataset<Scalar>& data, double alpha,
                              const FeatureConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  data.validate(cfg);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigurationError("ridge parameter must be finite and non-negative");
  }

  const Eigen::Index n = data.train_size;
  const MatrixX<Scalar> phi = feature_matrix(data, 0, n, cfg);
  const MatrixX<Scalar> y = data.targets.topRows(n);

  MatrixX<Scalar> gram = phi.transpose() * phi;
  gram.diagonal().array() += static_cast<Scalar>(alpha);

  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(gram);
  const auto& ev = eig.eigenvalues();
  const Scalar lmax = ev.maxCoeff();
  const Scalar lmin = ev.minCoeff();
  RidgeDiagnostics diag;
  diag.condition_number = lmin > Scalar(0) ? static_cast<double>(lmax / lmin)
                                           : std::numeric_limits<double>::infinity();

  MatrixX<Scalar> wt;  // d_tot x d
  if (alpha == 0.0) {
    diag.pseudo_inverse = true;
    wt = phi.completeOrthogonalDecomposition().solve(y);
  } else if (!(diag.condition_number <= kMaxRidgeCondition)) {
    // Same objective as the least-squares problem [Phi; sqrt(alpha) I] W^T = [Y; 0],
    // whose condition number is the square root of the normal matrix's.
    diag.pseudo_inverse = true;
    const Eigen::Index cols = phi.cols();
    MatrixX<Scalar> aug(n + cols, cols);
    aug << phi, MatrixX<Scalar>::Identity(cols, cols) * static_cast<Scalar>(std::sqrt(alpha));
    MatrixX<Scalar> rhs = MatrixX<Scalar>::Zero(n + cols, y.cols());
    rhs.topRows(n) = y;
    wt = aug.completeOrthogonalDecomposition().solve(rhs);
  } else {
    wt = gram.llt().solve(phi.transpose() * y);
  }

  NgrcModel<Scalar> model;
  model.config = cfg;
  model.alpha = alpha;
  model.set_weights(wt.transpose());
  diag.effectiveness_invertible = effectiveness_invertible(model.w_u);
  model.diagnostics = diag;
  if (opts.require_invertible_effectiveness && !diag.effectiveness_invertible) {
    throw TrainingError("learned control effectiveness is not invertible; control is impossible");
  }
  return model;
}

/// Objective ||Phi W^T - Y||^2 + alpha ||W||^2 over the training rows.
template <typename Scalar>
Scalar ridge_objective(const TrainingDataset<Scalar>& data, const MatrixX<Scalar>& w,
                       double alpha, const FeatureConfig& cfg) {
  const MatrixX<Scalar> phi = feature_matrix(data, 0, data.train_size, cfg);
  const MatrixX<Scalar> r = phi * w.transpose() - data.targets.topRows(data.train_size);
  return r.squaredNorm() + static_cast<Scalar>(alpha) * w.squaredNorm();
}

}  // namespace ngrc
