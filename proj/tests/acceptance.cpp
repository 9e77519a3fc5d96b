// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ngrc_control/cli.hpp"
#include "ngrc_control/harness.hpp"

namespace {

using Clock = std::chrono::steady_clock;
constexpr std::uint64_t kSeed = 1;
const std::vector<double> kNoise{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool within_factor(double value, double reference, double factor) {
  return value >= reference / factor && value <= reference * factor;
}

ngrc::Model learned_model(const char* name) {
  ngrc::Rng rng = ngrc::child_stream(kSeed, name);
  return ngrc::train_controller_model(ngrc::DataGenSpec{}, ngrc::default_alpha_grid(), {}, {}, rng);
}

ngrc::ControlTrace ideal_run(ngrc::TaskKind kind, double gain, long n, const ngrc::Model& model) {
  const auto task = ngrc::make_task(kind);
  const ngrc::HenonPlant plant({}, ngrc::NoiseSpec{0.0});
  ngrc::Rng rng(kSeed);
  return ngrc::run_closed_loop(plant, ngrc::ControllerConfig{gain, task.target, model}, task.s0, n, rng);
}

double first_step_error(const ngrc::ControlTrace& t) {
  const auto& r = t.records.at(1);
  return std::abs(r.e) / std::abs(r.x_des);
}

Outcome weight_recovery() {
  Outcome o;
  ngrc::Rng rng = ngrc::child_stream(kSeed, "acceptance-weights");
  const auto data = ngrc::generate_dataset(ngrc::DataGenSpec{}, {}, rng);
  const auto model = ngrc::train_ridge(data, 1e-12, {});
  Eigen::Matrix<double, 1, 7> truth;
  truth << 1, 1, 0, 1, -1.4, 0, 0;  // [u | c | x y | x^2 xy y^2]
  const double err = (model.weights() - truth).cwiseAbs().maxCoeff();
  o.require(err <= 1e-6, "max |W - W_true| = " + fmt("%.2e", err));
  return o;
}

Outcome prediction_noise_floor() {
  Outcome o;
  const std::vector<double> caption{1.09e-5, 1.06e-4, 1.04e-3, 1.02e-2, 0.98e-1};
  ngrc::PredictionSweepSpec spec;
  spec.m_train_grid = {10};
  spec.sigma_d_levels = kNoise;
  const auto result = ngrc::run_prediction_sweep(spec, kSeed);
  std::size_t level = 0;
  for (const auto& c : result.cells) {
    if (c.sweep != "predict") continue;
    const double ref = caption[level++];
    o.require(within_factor(c.mean_rmse, ref, 2.0),
              "sigma " + fmt("%.0e", c.sigma_d) + ": " + fmt("%.3e", c.mean_rmse) + " vs " +
                  fmt("%.2e", ref));
  }
  return o;
}

Outcome deadbeat() {
  Outcome o;
  const auto model = learned_model("acceptance-control");
  const double pu = first_step_error(ideal_run(ngrc::TaskKind::Pu1ToPu2, 0.0, 5, model));
  const double p4 = first_step_error(ideal_run(ngrc::TaskKind::Period4, 0.0, 5, model));
  const double arb = first_step_error(ideal_run(ngrc::TaskKind::Arbitrary, 0.0, 5, model));
  o.require(pu < 1e-10, "fixed point " + fmt("%.2e", pu));
  o.require(p4 < 1e-9, "period-4 " + fmt("%.2e", p4));
  o.require(arb < 1e-3, "arbitrary " + fmt("%.2e", arb));
  return o;
}

Outcome geometric_decay() {
  Outcome o;
  const auto model = learned_model("acceptance-control");
  const auto trace = ideal_run(ngrc::TaskKind::Pu1ToPu2, 0.9, 200, model);
  const auto [pu1, pu2] = ngrc::fixed_points<double>();
  const double e0 = pu1.x - pu2.x;
  const long oracle = static_cast<long>(
      std::ceil(std::log(0.01 * std::abs(pu2.x) / std::abs(e0)) / std::log(0.9)));
  const auto reached = ngrc::iterations_to_tolerance(trace, 0.01);
  o.require(oracle == 48, "oracle " + std::to_string(oracle));
  o.require(reached && *reached == 48, "reached " + std::to_string(reached.value_or(-1)));

  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const double e = trace.records[i].e;
    if (std::abs(e) < 1e-3) break;  // below this the ratio is limited by rounding
    worst = std::max(worst, std::abs(trace.records[i + 1].e / e - 0.9));
  }
  o.require(worst <= 1e-9, "ratio dev " + fmt("%.1e", worst));

  const auto arb = ideal_run(ngrc::TaskKind::Arbitrary, 0.9, ngrc::kArbitrarySwitchIteration, model);
  const auto arb_reached = ngrc::iterations_to_tolerance(arb, 0.01);
  o.require(arb_reached && *arb_reached <= 44, "arbitrary " + std::to_string(arb_reached.value_or(-1)));
  return o;
}

double cell_mean(const ngrc::SweepResult& r, double sigma, double gain) {
  for (const auto& c : r.cells) {
    if (c.sigma_d == sigma && c.cell_param == gain) return c.mean_rmse;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Outcome noise_robust_control() {
  Outcome o;
  ngrc::ControlSweepSpec spec;
  spec.gains = ngrc::default_gain_grid();
  spec.sigma_d_levels = kNoise;
  const auto r = ngrc::run_control_task(spec, kSeed).sweep;
  for (double s : kNoise) {
    const double k0 = cell_mean(r, s, 0.0);
    o.require(within_factor(k0, s, 2.0), "K=0 @" + fmt("%.0e", s) + " " + fmt("%.2e", k0));
    double inner_max = 0.0;
    for (const auto& c : r.cells) {
      if (c.sigma_d == s && std::abs(c.cell_param) < 1.0 && std::isfinite(c.mean_rmse)) {
        inner_max = std::max(inner_max, c.mean_rmse);
      }
    }
    for (const auto& c : r.cells) {
      if (c.sigma_d != s) continue;
      if (std::abs(c.cell_param) == 0.99) {
        const bool ok = c.escaped > 0 || c.mean_rmse >= 5.0 * k0;
        if (!ok) o.require(false, "|K|=0.99 @" + fmt("%.0e", s) + " " + fmt("%.2e", c.mean_rmse));
      }
      if (std::abs(c.cell_param) > 1.0) {
        const bool ok = c.escaped == c.trials || c.mean_rmse > inner_max;
        if (!ok) o.require(false, "K=" + fmt("%.2f", c.cell_param) + " @" + fmt("%.0e", s));
      }
    }
  }
  o.require(true, "|K|=0.99 >= 5x K=0 and |K|>1 maximal or escaped");
  return o;
}

Outcome model_error_robustness() {
  Outcome o;
  const std::vector<double> caption{1.60e-5, 1.68e-4, 1.60e-3, 1.60e-2, 1.93e-1};
  ngrc::ControlSweepSpec spec;
  spec.sweep = "k-modelerror";
  spec.gains = ngrc::default_gain_grid();
  spec.sigma_d_levels = kNoise;
  spec.sigma_dw_levels = kNoise;
  const auto r = ngrc::run_control_task(spec, kSeed).sweep;
  for (std::size_t i = 0; i < kNoise.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : r.cells) {
      if (c.sigma_d == kNoise[i] && std::isfinite(c.mean_rmse)) best = std::min(best, c.mean_rmse);
    }
    o.require(within_factor(best, caption[i], 3.0),
              "sigma " + fmt("%.0e", kNoise[i]) + ": " + fmt("%.3e", best) + " vs " +
                  fmt("%.2e", caption[i]));
  }
  return o;
}

std::string run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ngrc-control");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ngrc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return std::to_string(code) + "\n" + out.str();
}

Outcome determinism() {
  Outcome o;
  const std::vector<std::vector<std::string>> commands{
      {"predict-sweep", "--m-train", "4,10", "--trials", "20"},
      {"control-trace", "--task", "arbitrary", "--sigma-d", "1e-3"},
      {"sweep-k", "--k", "-0.6,0,0.6", "--trials", "20"},
      {"sweep-k-modelerror", "--k", "-0.6,0,0.6", "--trials", "20"},
  };
  for (const auto& args : commands) {
    auto serial = args;
    serial.insert(serial.end(), {"--threads", "1"});
    auto parallel = args;
    parallel.insert(parallel.end(), {"--threads", "4"});
    const std::string a = run_cli(serial);
    const std::string b = run_cli(serial);
    const std::string c = run_cli(parallel);
    o.require(a.rfind("0\n", 0) == 0 && a == b && a == c, args.front());
  }
  return o;
}

Outcome slaved_variable() {
  Outcome o;
  const auto model = learned_model("acceptance-control");
  const auto [pu1, pu2] = ngrc::fixed_points<double>();
  for (double gain : {0.0, 0.9}) {
    const auto trace = ideal_run(ngrc::TaskKind::Pu1ToPu2, gain, 200, model);
    const double y = trace.records.back().y();
    o.require(std::abs(y - (-0.33941)) <= 1e-4 && std::abs(y - 0.3 * pu2.x) <= 1e-4,
              "K=" + fmt("%.1f", gain) + " y=" + fmt("%.6f", y));
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "weight recovery", 1, weight_recovery},
      {2, "prediction error vs training size", 60, prediction_noise_floor},
      {3, "deadbeat control", 3, deadbeat},
      {4, "geometric decay", 1, geometric_decay},
      {5, "noise-robust control", 120, noise_robust_control},
      {6, "model-error robustness", 120, model_error_robustness},
      {7, "determinism", 60, determinism},
      {8, "slaved variable", 1, slaved_variable},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (secs > c.budget_s) o.require(false, "runtime over budget");
    std::printf("%s %d %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
