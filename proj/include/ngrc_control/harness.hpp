#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ngrc_control/control.hpp"
#include "ngrc_control/henon.hpp"
#include "ngrc_control/model.hpp"
#include "ngrc_control/ridge.hpp"
#include "ngrc_control/rng.hpp"

namespace ngrc {

// ---------------------------------------------------------------------------
// Data generation

struct Box {
  double x_min = -1.2;
  double x_max = 1.2;
  double y_min = -0.36;
  double y_max = 0.36;
};

struct DataGenSpec {
  long m_train = 10;
  long m_test = 50;
  double sigma_u = 0.1;
  double sigma_d = 0.0;
  long burn_in = 0;
  Box ic_box;
  int max_retries = 1000;
  /// Start here instead of sampling the box (burn-in still applies).
  std::optional<PlantState<double>> initial_state;
};

/// Samples an initial condition, runs `burn_in` unforced steps, then records
/// m_train + m_test samples (X_i, u_i, x_{i+1}) with u_i ~ N(0, sigma_u^2).
/// Noise sigma_d enters every step including burn-in. A trajectory that
/// escapes is discarded and restarted from a fresh initial condition.
Dataset generate_dataset(const DataGenSpec& spec, const HenonParams<double>& params, Rng& rng);

// ---------------------------------------------------------------------------
// Metrics

/// sqrt(mean((truth - estimate)^2))
template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& truth, const Eigen::MatrixBase<DerivedB>& estimate) {
  if (truth.size() == 0) throw DomainError("rmse of an empty sequence");
  if (truth.size() != estimate.size()) throw DomainError("rmse of sequences with unequal length");
  return std::sqrt((truth.template cast<double>() - estimate.template cast<double>())
                       .array()
                       .square()
                       .mean());
}

/// One-step prediction RMSE of the controlled output over the test split.
double test_rmse(const Model& model, const Dataset& data);

/// {0, 1e-12, 1e-11, ..., 1e-1, 1}
std::vector<double> default_alpha_grid();

struct AlphaSearchResult {
  double alpha = 0.0;
  double rmse = 0.0;
  Model model;
  std::vector<double> candidate_rmse;  ///< per grid entry; NaN where training failed
};

/// Trains on the training split for each alpha and keeps the one with the
/// lowest test RMSE; ties go to the smaller alpha.
AlphaSearchResult grid_search_alpha(const Dataset& data, const std::vector<double>& grid,
                                    const FeatureConfig& cfg, const TrainOptions& opts = {});

/// Smallest i such that |e_j| / |x_des,j| < rel_tol for every j >= i in the
/// trace; nullopt if never (or if the trace escaped).
std::optional<long> iterations_to_tolerance(const ControlTrace& trace, double rel_tol);

/// RMSE of e over records whose iteration lies in [first, last].
double window_rmse(const ControlTrace& trace, long first, long last);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
  std::string sweep;
  double cell_param = 0.0;  ///< M_train or K
  double sigma_d = 0.0;
  double sigma_dw = 0.0;
  double mean_rmse = 0.0;   ///< over non-escaped trials; NaN when none remain
  double std_rmse = 0.0;
  long trials = 0;
  long escaped = 0;
  double alpha = 0.0;
  std::string diagnostic;   ///< set when the cell aborted
};

struct SweepResult {
  std::vector<SweepCell> cells;
};

/// CSV header `sweep,cell_param,sigma_d,sigma_dw,mean_rmse,std_rmse,trials,escaped,alpha`.
void write_sweep_csv(std::ostream& os, const SweepResult& result);

/// Runs fn(0..count-1) on up to `threads` workers. fn must only touch
/// per-index state. The exception of the lowest failing index is rethrown.
void parallel_for(long count, int threads, const std::function<void(long)>& fn);

struct PredictionSweepSpec {
  std::vector<long> m_train_grid;
  std::vector<double> sigma_d_levels{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  long m_test = 50;
  long trials = 100;
  std::vector<double> alpha_grid = default_alpha_grid();
  DataGenSpec data;  ///< m_train/m_test/sigma_d are overridden per cell
  HenonParams<double> params;
  FeatureConfig features;
  int threads = 1;
};

/// For each (M_train, sigma_d) cell and each trial: fresh dataset, alpha
/// grid search on the 50 test points, one-step RMSE. Emits two rows per
/// cell: `predict` (alpha chosen per trial, median alpha reported) and
/// `predict-curve` (the single alpha minimizing the trial-mean RMSE).
SweepResult run_prediction_sweep(const PredictionSweepSpec& spec, std::uint64_t master_seed);

enum class TaskKind { Pu1ToPu2, Period4, Arbitrary };

struct ControlTask {
  TaskKind kind = TaskKind::Pu1ToPu2;
  TargetTrajectory target = TargetTrajectory::constant(0.0);
  PlantState<double> s0;
};

inline constexpr long kArbitrarySwitchIteration = 100;

/// P_U1 -> x_U2 from P_U1; period-4 cycle from (-1, 0); -1.5 then +1.5 at
/// iteration 100 from (0, 0). `s0` overrides the initial state.
ControlTask make_task(TaskKind kind, const HenonParams<double>& params = {},
                      std::optional<PlantState<double>> s0 = std::nullopt);

struct ControlSweepSpec {
  std::string sweep = "k";
  ControlTask task = make_task(TaskKind::Pu1ToPu2);
  std::vector<double> gains;
  std::vector<double> sigma_d_levels{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  /// Paired with sigma_d_levels; a single entry applies to every level.
  std::vector<double> sigma_dw_levels{0.0};
  long n_iters = 200;
  long window_first = 50;
  long window_last = 150;
  long trials = 100;
  DataGenSpec training;  ///< noiseless, M_train = 10, M_test = 50 by default
  std::vector<double> alpha_grid = default_alpha_grid();
  HenonParams<double> params;
  FeatureConfig features;
  bool keep_traces = false;  ///< retain trial 0 of every cell
  int threads = 1;
};

struct ControlTaskResult {
  std::vector<ControlTrace> traces;
  SweepResult sweep;
};

/// 81 gains (i - 40) * 0.03 spanning [-1.2, 1.2].
std::vector<double> default_gain_grid();

/// Trains a controller model on a fresh noiseless dataset with the best alpha.
Model train_controller_model(const DataGenSpec& training, const std::vector<double>& alpha_grid,
                             const HenonParams<double>& params, const FeatureConfig& features,
                             Rng& rng);

/// For every (noise level, gain) cell and trial: fresh model, optional weight
/// perturbation, closed loop with plant noise, RMSE of x - x_des over the
/// iteration window. Escaped trials are counted and left out of the mean.
ControlTaskResult run_control_task(const ControlSweepSpec& spec, std::uint64_t master_seed);

}  // namespace ngrc
