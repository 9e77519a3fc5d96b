#pragma once

#include <Eigen/Dense>

#include <limits>
#include <random>

#include "ngrc_control/features.hpp"
#include "ngrc_control/rng.hpp"

namespace ngrc {

/// Numerical facts about the solve that produced a model.
struct RidgeDiagnostics {
  double condition_number = 1.0;  ///< of the (regularized) normal matrix
  bool pseudo_inverse = false;    ///< rank-revealing fallback was used
  bool effectiveness_invertible = true;
};

/// Trained NG-RC readout, split into the control column block w_u (d x d)
/// and the state-feature block w_x (d x d_state).
///
/// Prediction:  Y_hat = w_x * O_X + w_u * u
template <typename Scalar>
struct NgrcModel {
  MatrixX<Scalar> w_u;
  MatrixX<Scalar> w_x;
  FeatureConfig config;
  double alpha = 0.0;
  RidgeDiagnostics diagnostics;

  /// The full readout [w_u | w_x], columns in feature-vector order.
  [[nodiscard]] MatrixX<Scalar> weights() const {
    MatrixX<Scalar> w(w_u.rows(), w_u.cols() + w_x.cols());
    w << w_u, w_x;
    return w;
  }

  void set_weights(const MatrixX<Scalar>& w) {
    if (w.rows() != config.d || w.cols() != config.d_tot()) {
      throw ConfigurationError("weight matrix shape does not match the feature configuration");
    }
    w_u = w.leftCols(config.d);
    w_x = w.rightCols(config.d_state());
  }

  /// Zero readout for the given configuration.
  static NgrcModel zeros(const FeatureConfig& cfg) {
    NgrcModel m;
    m.config = cfg;
    m.w_u = MatrixX<Scalar>::Zero(cfg.d, cfg.d);
    m.w_x = MatrixX<Scalar>::Zero(cfg.d, cfg.d_state());
    return m;
  }
};

using Model = NgrcModel<double>;

/// F_hat(X) = w_x * O_X.
template <typename Scalar, typename Derived>
VectorX<Scalar> predict_unforced(const NgrcModel<Scalar>& model,
                                 const Eigen::MatrixBase<Derived>& x) {
  return model.w_x * state_features(x.template cast<Scalar>(), model.config);
}

/// F_hat(X) + w_u * u.
template <typename Scalar, typename DerivedX, typename DerivedU>
VectorX<Scalar> predict(const NgrcModel<Scalar>& model, const Eigen::MatrixBase<DerivedX>& x,
                        const Eigen::MatrixBase<DerivedU>& u) {
  detail::check_length(u.size(), model.config.d, "control vector");
  return predict_unforced(model, x) + model.w_u * u.template cast<Scalar>();
}

/// Scalar-output convenience for the single controlled variable case.
template <typename Scalar, typename Derived>
Scalar predict(const NgrcModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x, Scalar u) {
  VectorX<Scalar> uv(1);
  uv(0) = u;
  return predict(model, x, uv)(0);
}

/// Copy of `model` with every readout weight offset by an independent
/// N(0, sigma^2) draw. Draws run over [w_u | w_x] in column-major order.
template <typename Scalar, typename Rng>
NgrcModel<Scalar> perturb_weights(const NgrcModel<Scalar>& model, double sigma, Rng& rng) {
  if (sigma < 0.0) throw DomainError("weight perturbation sigma must be non-negative");
  NgrcModel<Scalar> out = model;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> dist(0.0, sigma);
  MatrixX<Scalar> w = model.weights();
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      w(i, j) += static_cast<Scalar>(dist(rng));
    }
  }
  out.set_weights(w);
  return out;
}

}  // namespace ngrc
