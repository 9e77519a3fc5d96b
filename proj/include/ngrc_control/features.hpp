#pragma once

// NG-RC feature vector construction.
//
// Layout of the total feature vector (d_tot entries):
//
//   [ u (d) | c | X (d_lin) | monomials of X of degree 2..p (d_nonlin) ]
//
// The control block is always first. The trailing 1 + d_lin + d_nonlin
// entries form the state features O_X consumed by the unforced predictor.
// Monomials are listed in graded lexicographic order: all degree-2 terms,
// then degree 3, and so on; within a degree, combinations with repetition
// of variable indices in lexicographic order. For d_lin = 2, p = 2 this is
// [x^2, x*y, y^2].

#include <Eigen/Dense>

#include <cstddef>
#include <string>

#include "ngrc_control/errors.hpp"

namespace ngrc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

struct FeatureConfig {
  int d_lin = 2;       ///< number of observed variables
  int d = 1;           ///< control dimension (and number of controlled outputs)
  double c = 1.0;      ///< constant feature
  int p = 2;           ///< highest monomial order

  /// Number of unique monomials of total degree 2..p in d_lin variables.
  [[nodiscard]] int d_nonlin() const {
    // sum_{k=2}^{p} C(d_lin + k - 1, k)
    long total = 0;
    long term = 1;  // C(d_lin + k - 1, k) built incrementally from k = 0
    for (int k = 1; k <= p; ++k) {
      term = term * (d_lin + k - 1) / k;
      if (k >= 2) total += term;
    }
    return static_cast<int>(total);
  }
  /// Width of the state block O_X = c ⊕ lin ⊕ nonlin.
  [[nodiscard]] int d_state() const { return 1 + d_lin + d_nonlin(); }
  [[nodiscard]] int d_tot() const { return d + d_state(); }

  void validate() const {
    if (d_lin < 1) throw ConfigurationError("d_lin must be positive");
    if (d < 1) throw ConfigurationError("control dimension must be positive");
    if (p < 1) throw ConfigurationError("monomial order must be at least 1");
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

namespace detail {

inline void check_length(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw ConfigurationError(std::string(what) + ": expected length " + std::to_string(want) +
                             ", got " + std::to_string(got));
  }
}

// Appends every monomial of exactly `degree` with variable indices >= `first`
// to `out`, starting at `pos`. `partial` is the product accumulated so far.
template <typename Derived, typename Scalar>
void emit_monomials(const Eigen::MatrixBase<Derived>& x, int degree, Eigen::Index first,
                    Scalar partial, VectorX<Scalar>& out, Eigen::Index& pos) {
  if (degree == 0) {
    out(pos++) = partial;
    return;
  }
  for (Eigen::Index j = first; j < x.size(); ++j) {
    emit_monomials(x, degree - 1, j, Scalar(partial * x(j)), out, pos);
  }
}

inline int count_nonlinear(int d_lin, int p) {
  FeatureConfig cfg;
  cfg.d_lin = d_lin;
  cfg.p = p;
  return cfg.d_nonlin();
}

}  // namespace detail

/// The linear block is the observable vector itself.
template <typename Derived>
VectorX<typename Derived::Scalar> build_linear_features(const Eigen::MatrixBase<Derived>& x,
                                                        const FeatureConfig& cfg) {
  detail::check_length(x.size(), cfg.d_lin, "observable vector");
  return x;
}

/// Unique monomials of total degree 2..p of the entries of `x`.
template <typename Derived>
VectorX<typename Derived::Scalar> build_nonlinear_features(const Eigen::MatrixBase<Derived>& x,
                                                           int p) {
  using Scalar = typename Derived::Scalar;
  if (p < 2) throw ConfigurationError("nonlinear features need order p >= 2");
  if (x.size() < 1) throw ConfigurationError("observable vector is empty");
  VectorX<Scalar> out(detail::count_nonlinear(static_cast<int>(x.size()), p));
  Eigen::Index pos = 0;
  for (int degree = 2; degree <= p; ++degree) {
    detail::emit_monomials(x, degree, 0, Scalar(1), out, pos);
  }
  return out;
}

/// State features O_X = c ⊕ X ⊕ nonlin(X), the part of the feature vector without u.
template <typename Derived>
VectorX<typename Derived::Scalar> state_features(const Eigen::MatrixBase<Derived>& x,
                                                 const FeatureConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  detail::check_length(x.size(), cfg.d_lin, "observable vector");
  VectorX<Scalar> out(cfg.d_state());
  out(0) = static_cast<Scalar>(cfg.c);
  out.segment(1, cfg.d_lin) = x;
  if (cfg.p >= 2) out.tail(cfg.d_nonlin()) = build_nonlinear_features(x, cfg.p);
  return out;
}

/// Total feature vector [u | c | lin | nonlin].
template <typename DerivedU, typename DerivedX>
VectorX<typename DerivedX::Scalar> assemble_features(const Eigen::MatrixBase<DerivedU>& u,
                                                     const Eigen::MatrixBase<DerivedX>& x,
                                                     const FeatureConfig& cfg) {
  detail::check_length(u.size(), cfg.d, "control vector");
  VectorX<typename DerivedX::Scalar> out(cfg.d_tot());
  out.head(cfg.d) = u.template cast<typename DerivedX::Scalar>();
  out.tail(cfg.d_state()) = state_features(x, cfg);
  return out;
}

}  // namespace ngrc
