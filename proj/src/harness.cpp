#include "ngrc_control/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace ngrc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

struct Moments {
  double mean = kNaN;
  double std = kNaN;
  long count = 0;
};

// Mean and sample standard deviation of the finite entries.
Moments moments(const std::vector<double>& values) {
  Moments m;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++m.count;
    }
  }
  if (m.count == 0) return m;
  m.mean = sum / static_cast<double>(m.count);
  double ss = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) ss += (v - m.mean) * (v - m.mean);
  }
  m.std = m.count > 1 ? std::sqrt(ss / static_cast<double>(m.count - 1)) : 0.0;
  return m;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) return kNaN;
  const auto mid = values.begin() + static_cast<long>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

const char* task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Pu1ToPu2: return "pu1-pu2";
    case TaskKind::Period4: return "period4";
    case TaskKind::Arbitrary: return "arbitrary";
  }
  return "unknown";
}

}  // namespace

Dataset generate_dataset(const DataGenSpec& spec, const HenonParams<double>& params, Rng& rng) {
  if (spec.m_train < 1 || spec.m_test < 0) throw ConfigurationError("dataset split sizes invalid");
  if (spec.sigma_u < 0.0 || spec.sigma_d < 0.0) throw ConfigurationError("negative sigma");
  if (spec.burn_in < 0 || spec.max_retries < 1) throw ConfigurationError("invalid burn-in/retries");

  const NoiseSpec noise{spec.sigma_d};
  const long n = spec.m_train + spec.m_test;
  std::uniform_real_distribution<double> ux(spec.ic_box.x_min, spec.ic_box.x_max);
  std::uniform_real_distribution<double> uy(spec.ic_box.y_min, spec.ic_box.y_max);
  std::normal_distribution<double> perturbation(0.0, spec.sigma_u);

  Dataset data;
  data.states.resize(n, 2);
  data.perturbations.resize(n, 1);
  data.targets.resize(n, 1);
  data.train_size = spec.m_train;

  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    PlantState<double> s;
    if (spec.initial_state) {
      s = *spec.initial_state;
    } else {
      s.x = ux(rng);
      s.y = uy(rng);
    }
    bool ok = !has_escaped(s);
    for (long i = 0; ok && i < spec.burn_in; ++i) {
      s = henon_step(s, 0.0, params, noise, rng);
      ok = !has_escaped(s);
    }
    for (long i = 0; ok && i < n; ++i) {
      const double u = spec.sigma_u > 0.0 ? perturbation(rng) : 0.0;
      const PlantState<double> next = henon_step(s, u, params, noise, rng);
      if (has_escaped(next)) {
        ok = false;
        break;
      }
      data.states.row(i) << s.x, s.y;
      data.perturbations(i, 0) = u;
      data.targets(i, 0) = next.x;
      s = next;
    }
    if (ok) return data;
  }
  throw GenerationError("dataset generation escaped on every one of " +
                        std::to_string(spec.max_retries) + " initial conditions");
}

double test_rmse(const Model& model, const Dataset& data) {
  const Eigen::Index m = data.test_size();
  if (m < 1) throw DomainError("dataset has no test rows");
  Eigen::VectorXd predicted(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index row = data.train_size + i;
    predicted(i) = predict(model, data.states.row(row).transpose(),
                           data.perturbations.row(row).transpose())(0);
  }
  return rmse(data.targets.col(0).tail(m), predicted);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid{0.0};
  for (int e = -12; e <= 0; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

AlphaSearchResult grid_search_alpha(const Dataset& data, const std::vector<double>& grid,
                                    const FeatureConfig& cfg, const TrainOptions& opts) {
  if (grid.empty()) throw ConfigurationError("alpha grid is empty");
  for (double a : grid) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigurationError("alpha grid values must lie in [0, 1]");
  }
  AlphaSearchResult best;
  best.rmse = std::numeric_limits<double>::infinity();
  best.candidate_rmse.assign(grid.size(), kNaN);
  bool found = false;
  std::string last_error;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    try {
      Model m = train_ridge(data, grid[k], cfg, opts);
      const double r = test_rmse(m, data);
      best.candidate_rmse[k] = r;
      if (!std::isfinite(r)) continue;
      if (!found || r < best.rmse || (r == best.rmse && grid[k] < best.alpha)) {
        best.alpha = grid[k];
        best.rmse = r;
        best.model = std::move(m);
        found = true;
      }
    } catch (const TrainingError& e) {
      last_error = e.what();
    }
  }
  if (!found) throw TrainingError("no alpha candidate could be trained: " + last_error);
  return best;
}

std::optional<long> iterations_to_tolerance(const ControlTrace& trace, double rel_tol) {
  if (trace.records.empty() || trace.escaped) return std::nullopt;
  // Walk back from the end until the first violation.
  std::size_t first_ok = trace.records.size();
  while (first_ok > 0) {
    const auto& r = trace.records[first_ok - 1];
    const double rel = std::abs(r.e) / std::abs(r.x_des);
    if (!(rel < rel_tol)) break;
    --first_ok;
  }
  if (first_ok == trace.records.size()) return std::nullopt;
  return trace.records[first_ok].iter;
}

double window_rmse(const ControlTrace& trace, long first, long last) {
  std::vector<double> errors;
  for (const auto& r : trace.records) {
    if (r.iter >= first && r.iter <= last) errors.push_back(r.e);
  }
  if (errors.empty()) throw DomainError("no trace records inside the RMSE window");
  const Eigen::Map<const Eigen::VectorXd> e(errors.data(), static_cast<Eigen::Index>(errors.size()));
  return rmse(e, Eigen::VectorXd::Zero(e.size()));
}

void parallel_for(long count, int threads, const std::function<void(long)>& fn) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const long n_workers = std::min<long>(threads, count);
  for (long w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SweepResult run_prediction_sweep(const PredictionSweepSpec& spec, std::uint64_t master_seed) {
  if (spec.trials < 1) throw ConfigurationError("sweep needs at least one trial");
  struct Trial {
    double rmse = kNaN;
    double alpha = kNaN;
    std::vector<double> candidates;
    std::string error;
  };
  const long n_m = static_cast<long>(spec.m_train_grid.size());
  const long n_s = static_cast<long>(spec.sigma_d_levels.size());
  const long n_cells = n_m * n_s;
  std::vector<Trial> trials(static_cast<std::size_t>(n_cells * spec.trials));

  parallel_for(n_cells * spec.trials, spec.threads, [&](long job) {
    const long cell = job / spec.trials;
    const long trial = job % spec.trials;
    const long m_train = spec.m_train_grid[static_cast<std::size_t>(cell % n_m)];
    const double sigma = spec.sigma_d_levels[static_cast<std::size_t>(cell / n_m)];
    Rng rng = child_stream(master_seed, "predict",
                           {static_cast<std::uint64_t>(m_train), bits(sigma),
                            static_cast<std::uint64_t>(trial)});
    DataGenSpec gen = spec.data;
    gen.m_train = m_train;
    gen.m_test = spec.m_test;
    gen.sigma_d = sigma;
    Trial& out = trials[static_cast<std::size_t>(job)];
    try {
      const Dataset data = generate_dataset(gen, spec.params, rng);
      TrainOptions opts;
      opts.require_invertible_effectiveness = false;
      const AlphaSearchResult search = grid_search_alpha(data, spec.alpha_grid, spec.features, opts);
      out.rmse = search.rmse;
      out.alpha = search.alpha;
      out.candidates = search.candidate_rmse;
    } catch (const std::runtime_error& e) {
      out.error = e.what();
    }
  });

  SweepResult result;
  for (long s = 0; s < n_s; ++s) {
    for (long m = 0; m < n_m; ++m) {
      const long cell = s * n_m + m;
      const auto first = trials.begin() + cell * spec.trials;
      const std::vector<Trial> cell_trials(first, first + spec.trials);

      SweepCell row;
      row.sweep = "predict";
      row.cell_param = static_cast<double>(spec.m_train_grid[static_cast<std::size_t>(m)]);
      row.sigma_d = spec.sigma_d_levels[static_cast<std::size_t>(s)];
      row.trials = spec.trials;
      SweepCell curve = row;
      curve.sweep = "predict-curve";

      const auto failed = std::find_if(cell_trials.begin(), cell_trials.end(),
                                       [](const Trial& t) { return !t.error.empty(); });
      if (failed != cell_trials.end()) {
        row.mean_rmse = row.std_rmse = row.alpha = kNaN;
        row.diagnostic = failed->error;
        curve = row;
        curve.sweep = "predict-curve";
        result.cells.push_back(row);
        result.cells.push_back(curve);
        continue;
      }

      std::vector<double> rmses, alphas;
      for (const auto& t : cell_trials) {
        rmses.push_back(t.rmse);
        alphas.push_back(t.alpha);
      }
      const Moments mo = moments(rmses);
      row.mean_rmse = mo.mean;
      row.std_rmse = mo.std;
      row.alpha = lower_median(alphas);

      // One alpha for the whole curve cell: minimize the trial-mean RMSE.
      double best_mean = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < spec.alpha_grid.size(); ++k) {
        std::vector<double> at_alpha;
        bool complete = true;
        for (const auto& t : cell_trials) {
          complete = complete && std::isfinite(t.candidates[k]);
          at_alpha.push_back(t.candidates[k]);
        }
        if (!complete) continue;
        const Moments ma = moments(at_alpha);
        if (ma.mean < best_mean || (ma.mean == best_mean && spec.alpha_grid[k] < curve.alpha)) {
          best_mean = ma.mean;
          curve.mean_rmse = ma.mean;
          curve.std_rmse = ma.std;
          curve.alpha = spec.alpha_grid[k];
        }
      }
      if (!std::isfinite(best_mean)) {
        curve.mean_rmse = curve.std_rmse = curve.alpha = kNaN;
        curve.diagnostic = "no alpha trained in every trial";
      }
      result.cells.push_back(row);
      result.cells.push_back(curve);
    }
  }
  return result;
}

ControlTask make_task(TaskKind kind, const HenonParams<double>& params,
                      std::optional<PlantState<double>> s0) {
  ControlTask task;
  task.kind = kind;
  switch (kind) {
    case TaskKind::Pu1ToPu2: {
      const auto [pu1, pu2] = fixed_points(params);
      task.target = TargetTrajectory::constant(pu2.x);
      task.s0 = pu1;
      break;
    }
    case TaskKind::Period4: {
      std::vector<double> xs;
      for (const auto& p : period4_orbit()) xs.push_back(p.x);
      task.target = TargetTrajectory::periodic(std::move(xs));
      task.s0 = {-1.0, 0.0};
      break;
    }
    case TaskKind::Arbitrary:
      task.target = TargetTrajectory::piecewise({{0, -1.5}, {kArbitrarySwitchIteration, 1.5}});
      task.s0 = {0.0, 0.0};
      break;
  }
  if (s0) task.s0 = *s0;
  return task;
}

std::vector<double> default_gain_grid() {
  std::vector<double> gains;
  for (int i = 0; i <= 80; ++i) gains.push_back(static_cast<double>((i - 40) * 3) / 100.0);
  return gains;
}

Model train_controller_model(const DataGenSpec& training, const std::vector<double>& alpha_grid,
                             const HenonParams<double>& params, const FeatureConfig& features,
                             Rng& rng) {
  const Dataset data = generate_dataset(training, params, rng);
  TrainOptions opts;
  opts.require_invertible_effectiveness = false;
  AlphaSearchResult search = grid_search_alpha(data, alpha_grid, features, opts);
  if (!search.model.diagnostics.effectiveness_invertible) {
    throw TrainingError("learned control effectiveness is not invertible; control is impossible");
  }
  return std::move(search.model);
}

ControlTaskResult run_control_task(const ControlSweepSpec& spec, std::uint64_t master_seed) {
  if (spec.trials < 1) throw ConfigurationError("sweep needs at least one trial");
  if (spec.n_iters <= spec.window_last) {
    throw ConfigurationError("n_iters must exceed the last RMSE window iteration");
  }
  if (spec.sigma_dw_levels.size() != 1 && spec.sigma_dw_levels.size() != spec.sigma_d_levels.size()) {
    throw ConfigurationError("sigma_dw levels must be a single value or pair with sigma_d levels");
  }
  const long n_k = static_cast<long>(spec.gains.size());
  const long n_s = static_cast<long>(spec.sigma_d_levels.size());
  const long n_cells = n_k * n_s;
  auto sigma_dw_at = [&](long s) {
    return spec.sigma_dw_levels.size() == 1 ? spec.sigma_dw_levels.front()
                                            : spec.sigma_dw_levels[static_cast<std::size_t>(s)];
  };

  struct Trial {
    double rmse = kNaN;
    double alpha = kNaN;
    bool escaped = false;
    ControlTrace trace;
  };
  std::vector<Trial> trials(static_cast<std::size_t>(n_cells * spec.trials));

  parallel_for(n_cells * spec.trials, spec.threads, [&](long job) {
    const long cell = job / spec.trials;
    const long trial = job % spec.trials;
    const double gain = spec.gains[static_cast<std::size_t>(cell % n_k)];
    const long s = cell / n_k;
    const double sigma_d = spec.sigma_d_levels[static_cast<std::size_t>(s)];
    const double sigma_dw = sigma_dw_at(s);
    const std::uint64_t trial_seed =
        derive_seed(master_seed, {stream_id(spec.sweep), stream_id(task_name(spec.task.kind)),
                                  bits(gain), bits(sigma_d), bits(sigma_dw),
                                  static_cast<std::uint64_t>(trial)});
    Rng rng(trial_seed);

    Model model = train_controller_model(spec.training, spec.alpha_grid, spec.params,
                                         spec.features, rng);
    const double alpha = model.alpha;
    if (sigma_dw > 0.0) model = perturb_weights(model, sigma_dw, rng);

    const HenonPlant plant(spec.params, NoiseSpec{sigma_d});
    ControllerConfig controller{gain, spec.task.target, std::move(model)};
    Trial& out = trials[static_cast<std::size_t>(job)];
    out.alpha = alpha;
    try {
      out.trace = run_closed_loop(plant, controller, spec.task.s0, spec.n_iters, rng);
    } catch (const ControlError&) {
      out.trace.escaped = true;
    }
    out.trace.meta = {gain, sigma_d, sigma_dw, trial_seed};
    out.escaped = out.trace.escaped;
    if (!out.escaped) out.rmse = window_rmse(out.trace, spec.window_first, spec.window_last);
    if (!(spec.keep_traces && trial == 0)) out.trace.records.clear();
  });

  ControlTaskResult result;
  for (long s = 0; s < n_s; ++s) {
    for (long k = 0; k < n_k; ++k) {
      const long cell = s * n_k + k;
      SweepCell row;
      row.sweep = spec.sweep;
      row.cell_param = spec.gains[static_cast<std::size_t>(k)];
      row.sigma_d = spec.sigma_d_levels[static_cast<std::size_t>(s)];
      row.sigma_dw = sigma_dw_at(s);
      row.trials = spec.trials;
      std::vector<double> rmses, alphas;
      for (long t = 0; t < spec.trials; ++t) {
        auto& tr = trials[static_cast<std::size_t>(cell * spec.trials + t)];
        alphas.push_back(tr.alpha);
        if (tr.escaped) {
          ++row.escaped;
        } else {
          rmses.push_back(tr.rmse);
        }
        if (spec.keep_traces && t == 0) result.traces.push_back(std::move(tr.trace));
      }
      const Moments mo = moments(rmses);
      row.mean_rmse = mo.mean;
      row.std_rmse = mo.std;
      row.alpha = lower_median(alphas);
      result.sweep.cells.push_back(row);
    }
  }
  return result;
}

}  // namespace ngrc
