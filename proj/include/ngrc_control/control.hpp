#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "ngrc_control/henon.hpp"
#include "ngrc_control/model.hpp"
#include "ngrc_control/ridge.hpp"

namespace ngrc {

/// e = y - y_des
template <typename Scalar>
constexpr Scalar tracking_error(Scalar y, Scalar y_des) {
  return y - y_des;
}

/// Feedback-linearizing control law
///
///   u = W_u^{-1} [ y_des_next - F_hat(X) + K e ]
///
/// With a perfect model and no disturbance the next tracking error is K e.
template <typename Scalar, typename DerivedX, typename DerivedY, typename DerivedE>
VectorX<Scalar> control_signal(const NgrcModel<Scalar>& model, const Eigen::MatrixBase<DerivedX>& x,
                               const Eigen::MatrixBase<DerivedY>& y_des_next,
                               const Eigen::MatrixBase<DerivedE>& e, const MatrixX<Scalar>& gain) {
  const int d = model.config.d;
  detail::check_length(y_des_next.size(), d, "desired output");
  detail::check_length(e.size(), d, "tracking error");
  if (gain.rows() != d || gain.cols() != d) throw ConfigurationError("gain must be d x d");
  const VectorX<Scalar> rhs = y_des_next.template cast<Scalar>() - predict_unforced(model, x) +
                              gain * e.template cast<Scalar>();
  if (d == 1) {
    const Scalar w = model.w_u(0, 0);
    if (!(std::abs(w) >= Scalar(kMinEffectiveness))) {
      throw ControlError("control effectiveness is not invertible");
    }
    return rhs / w;
  }
  Eigen::FullPivLU<MatrixX<Scalar>> lu(model.w_u);
  lu.setThreshold(kMinEffectiveness);
  if (!lu.isInvertible()) throw ControlError("control effectiveness is not invertible");
  return lu.solve(rhs);
}

/// Single controlled variable, scalar gain.
template <typename Scalar, typename DerivedX>
Scalar control_signal(const NgrcModel<Scalar>& model, const Eigen::MatrixBase<DerivedX>& x,
                      Scalar y_des_next, Scalar e, Scalar gain) {
  VectorX<Scalar> yd(1), ev(1);
  yd(0) = y_des_next;
  ev(0) = e;
  MatrixX<Scalar> k(1, 1);
  k(0, 0) = gain;
  return control_signal(model, x, yd, ev, k)(0);
}

/// Desired controlled-output sequence, defined for every iteration i >= 0.
class TargetTrajectory {
 public:
  struct Constant {
    double value;
  };
  /// values[(i + phase) % size]
  struct Periodic {
    std::vector<double> values;
    std::size_t phase = 0;
  };
  /// (start iteration, value) pairs sorted by start; the first must start at 0.
  struct Piecewise {
    std::vector<std::pair<long, double>> segments;
  };

  static TargetTrajectory constant(double value) { return TargetTrajectory(Constant{value}); }
  static TargetTrajectory periodic(std::vector<double> values, std::size_t phase = 0);
  static TargetTrajectory piecewise(std::vector<std::pair<long, double>> segments);

  [[nodiscard]] double at(long i) const;

  [[nodiscard]] const auto& variant() const { return target_; }

 private:
  using Variant = std::variant<Constant, Periodic, Piecewise>;
  explicit TargetTrajectory(Variant v) : target_(std::move(v)) {}
  Variant target_;
};

struct ControllerConfig {
  double gain = 0.0;
  TargetTrajectory target = TargetTrajectory::constant(0.0);
  Model model;

  /// Ideal error dynamics e' = K e decay only for |K| < 1.
  [[nodiscard]] bool gain_stable() const { return std::abs(gain) < 1.0; }
};

struct ControlRecord {
  long iter = 0;
  Eigen::VectorXd observed;  ///< measured observables at this iteration
  double u = 0.0;
  double x_des = 0.0;
  double e = 0.0;

  [[nodiscard]] double x() const { return observed(0); }
  [[nodiscard]] double y() const { return observed.size() > 1 ? observed(1) : 0.0; }
};

struct TraceMetadata {
  double gain = 0.0;
  double sigma_d = 0.0;
  double sigma_dw = 0.0;
  std::uint64_t seed = 0;
};

struct ControlTrace {
  std::vector<ControlRecord> records;
  TraceMetadata meta;
  bool escaped = false;
  std::optional<long> escaped_at;  ///< iteration whose state left the bounded region
};

/// Closed loop from iteration 0. Each iteration reads x_des,i and x_des,i+1,
/// forms e_i, computes u_i, records, then steps the plant. A state that
/// escapes truncates the trace.
template <DiscretePlant Plant, typename Urbg>
ControlTrace run_closed_loop(const Plant& plant, const ControllerConfig& controller,
                             typename Plant::State s0, long n_iters, Urbg& rng) {
  if (n_iters < 1) throw ConfigurationError("closed loop needs at least one iteration");
  ControlTrace trace;
  trace.meta.gain = controller.gain;
  trace.records.reserve(static_cast<std::size_t>(n_iters));
  if (plant.escaped(s0)) {
    trace.escaped = true;
    trace.escaped_at = 0;
    return trace;
  }
  auto state = s0;
  for (long i = 0; i < n_iters; ++i) {
    const Eigen::VectorXd obs = plant.observe(state);
    const double x_des = controller.target.at(i);
    const double e = tracking_error(plant.output(state), x_des);
    const double u =
        control_signal(controller.model, obs, controller.target.at(i + 1), e, controller.gain);
    trace.records.push_back({i, obs, u, x_des, e});
    state = plant.step(state, u, rng);
    if (plant.escaped(state)) {
      trace.escaped = true;
      trace.escaped_at = i + 1;
      break;
    }
  }
  return trace;
}

/// CSV with header `iter,x,y,u,x_des,e`, values at 17 significant digits.
void write_trace_csv(std::ostream& os, const ControlTrace& trace);

}  // namespace ngrc
