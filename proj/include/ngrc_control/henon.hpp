#pragma once

// The controlled Hénon map
//
//   x' = 1 - a x^2 + y + g u + d_x
//   y' = b x + d_y
//
// with d_x, d_y ~ N(0, sigma_d^2), and the plant contract the controller
// and experiment harness are written against.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <random>
#include <utility>

#include "ngrc_control/errors.hpp"
#include "ngrc_control/features.hpp"
#include "ngrc_control/rng.hpp"

namespace ngrc {

/// A discrete-time plant driven by a scalar control input.
///
/// `step` advances the true state; `observe` projects it onto the measured
/// variables fed to the NG-RC; `output` is the controlled variable; `escaped`
/// reports divergence.
template <typename P>
concept DiscretePlant = requires(const P& plant, const typename P::State& s, double u, Rng& rng) {
  typename P::State;
  { plant.step(s, u, rng) } -> std::same_as<typename P::State>;
  { plant.observe(s) } -> std::convertible_to<Eigen::VectorXd>;
  { plant.output(s) } -> std::convertible_to<double>;
  { plant.escaped(s) } -> std::convertible_to<bool>;
};

template <typename Scalar>
struct HenonParams {
  Scalar a = Scalar(1.4);
  Scalar b = Scalar(0.3);
  Scalar g = Scalar(1);  ///< gain on the control input
};

template <typename Scalar>
struct PlantState {
  Scalar x{};
  Scalar y{};

  [[nodiscard]] Eigen::Matrix<Scalar, 2, 1> observables() const { return {x, y}; }
  [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y); }

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

/// Process noise added to both map coordinates each step.
struct NoiseSpec {
  double sigma_d = 0.0;
};

inline constexpr double kEscapeBound = 3.0;

/// Outside |x|, |y| <= 3, or not finite. The attractor sits well inside
/// |x| <= 1.5, |y| <= 0.45.
template <typename Scalar>
bool has_escaped(const PlantState<Scalar>& s) {
  return !s.finite() || std::abs(s.x) > Scalar(kEscapeBound) ||
         std::abs(s.y) > Scalar(kEscapeBound);
}

/// One iteration of the map. With sigma_d == 0 the generator is not touched,
/// so the deterministic map is reproduced bit for bit. Otherwise d_x is drawn
/// before d_y.
template <typename Scalar, typename Urbg>
PlantState<Scalar> henon_step(const PlantState<Scalar>& s, Scalar u, const HenonParams<Scalar>& p,
                              const NoiseSpec& noise, Urbg& rng) {
  if (!s.finite()) throw EscapedStateError("Hénon step from a non-finite state");
  PlantState<Scalar> next{Scalar(1) - p.a * s.x * s.x + s.y + p.g * u, p.b * s.x};
  if (noise.sigma_d > 0.0) {
    std::normal_distribution<double> dist(0.0, noise.sigma_d);
    next.x += static_cast<Scalar>(dist(rng));
    next.y += static_cast<Scalar>(dist(rng));
  }
  return next;
}

/// Noise-free, unforced iteration.
template <typename Scalar>
PlantState<Scalar> henon_map(const PlantState<Scalar>& s, const HenonParams<Scalar>& p = {}) {
  return {Scalar(1) - p.a * s.x * s.x + s.y, p.b * s.x};
}

/// The two fixed points, roots of a x^2 + (1 - b) x - 1 = 0 with y = b x,
/// ordered by descending x: first is P_U1 (on the attractor), second P_U2.
template <typename Scalar>
std::pair<PlantState<Scalar>, PlantState<Scalar>> fixed_points(const HenonParams<Scalar>& p = {}) {
  if (!(p.a > Scalar(0))) throw DomainError("fixed points require a > 0");
  const Scalar lin = Scalar(1) - p.b;
  const Scalar disc = lin * lin + Scalar(4) * p.a;
  if (!(disc > Scalar(0))) throw DomainError("fixed points are not real");
  // Cancellation-free pair: q = -(lin + sqrt(disc))/2, roots q/a and -1/q.
  const Scalar q = -(lin + std::sqrt(disc)) / Scalar(2);
  const Scalar r1 = q / p.a;
  const Scalar r2 = Scalar(-1) / q;
  const Scalar hi = std::max(r1, r2);
  const Scalar lo = std::min(r1, r2);
  return {PlantState<Scalar>{hi, p.b * hi}, PlantState<Scalar>{lo, p.b * lo}};
}

/// The 4-cycle P1 -> P2 -> P3 -> P4 of the canonical map (a = 1.4, b = 0.3),
/// to the six significant digits it is usually quoted with.
inline std::array<PlantState<double>, 4> period4_orbit() {
  return {{{0.638194, -0.21203},
           {0.217762, 0.191458},
           {1.12507, 0.0653285},
           {-0.706767, 0.337521}}};
}

/// Hénon map bundled with its noise level, satisfying DiscretePlant.
/// Observables are (x, y); the controlled output is x.
class HenonPlant {
 public:
  using State = PlantState<double>;

  HenonPlant() = default;
  HenonPlant(HenonParams<double> params, NoiseSpec noise) : params_(params), noise_(noise) {}

  template <typename Urbg>
  [[nodiscard]] State step(const State& s, double u, Urbg& rng) const {
    return henon_step(s, u, params_, noise_, rng);
  }
  [[nodiscard]] Eigen::VectorXd observe(const State& s) const { return s.observables(); }
  [[nodiscard]] double output(const State& s) const { return s.x; }
  [[nodiscard]] bool escaped(const State& s) const { return has_escaped(s); }

  [[nodiscard]] const HenonParams<double>& params() const { return params_; }
  [[nodiscard]] const NoiseSpec& noise() const { return noise_; }

 private:
  HenonParams<double> params_;
  NoiseSpec noise_;
};

static_assert(DiscretePlant<HenonPlant>);

}  // namespace ngrc
