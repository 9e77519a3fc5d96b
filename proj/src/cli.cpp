#include "ngrc_control/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <memory>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "ngrc_control/control.hpp"
#include "ngrc_control/harness.hpp"
#include "ngrc_control/io.hpp"

namespace ngrc::cli {

namespace {

using nlohmann::json;

constexpr const char* kConfigPrefix = "# config: ";

const std::vector<std::string>& echo_keys() {
  static const std::vector<std::string> keys{
      "command", "seed",   "a",      "b",     "g",    "sigma_u", "sigma_d", "sigma_dw",
      "k",       "m_train", "m_test", "n_iters", "trials", "alpha_grid", "task", "x0",
      "y0",      "model"};
  return keys;
}

bool is_sweep(const std::string& command) {
  return command == "predict-sweep" || command == "sweep-k" || command == "sweep-k-modelerror";
}

json defaults(const std::string& command) {
  json d;
  d["command"] = command;
  d["seed"] = std::uint64_t{1};
  d["a"] = 1.4;
  d["b"] = 0.3;
  d["g"] = 1.0;
  d["sigma_u"] = 0.1;
  d["m_test"] = 50;
  d["n_iters"] = 200;
  d["trials"] = 100;
  d["alpha_grid"] = default_alpha_grid();
  d["task"] = "pu1-pu2";
  d["model"] = "";
  d["m_train"] = json::array({10});
  d["sigma_d"] = is_sweep(command) ? json::array({1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) : json::array({0.0});
  if (command == "predict-sweep") {
    json grid = json::array();
    for (int m = 1; m <= 20; ++m) grid.push_back(m);
    d["m_train"] = grid;
  }
  d["k"] = command == "control-trace" ? json::array({0.0, 0.3, 0.6, 0.9}) : json(default_gain_grid());
  return d;
}

std::vector<double> as_doubles(const json& v, const char* key) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigurationError(std::string(key) + " must be a number or list");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigurationError(std::string(key) + " entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<long> as_longs(const json& v, const char* key) {
  std::vector<long> out;
  for (double d : as_doubles(v, key)) {
    if (d != static_cast<double>(static_cast<long>(d))) {
      throw ConfigurationError(std::string(key) + " entries must be integers");
    }
    out.push_back(static_cast<long>(d));
  }
  return out;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw ConfigurationError(message);
}

TaskKind parse_task(const std::string& name) {
  if (name == "pu1-pu2") return TaskKind::Pu1ToPu2;
  if (name == "period4") return TaskKind::Period4;
  if (name == "arbitrary") return TaskKind::Arbitrary;
  throw ConfigurationError("unknown task '" + name + "' (pu1-pu2, period4, arbitrary)");
}

HenonParams<double> plant_params(const RunConfig& c) { return {c.a, c.b, c.g}; }

void write_header(std::ostream& os, const RunConfig& c) {
  os << "# ngrc-control " << c.command << '\n' << kConfigPrefix << c.echo().dump() << '\n';
}

// Runs fn against the --out file, or `fallback` when --out is "-".
void with_output(const std::string& path, std::ostream& fallback,
                 const std::function<void(std::ostream&)>& fn) {
  if (path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output file " + path);
  fn(file);
  if (!file) throw std::runtime_error("failed writing output file " + path);
}

std::vector<std::string> feature_labels(const FeatureConfig& cfg) {
  static const char* names[] = {"x", "y", "z", "w"};
  auto var = [&](int i) {
    return cfg.d_lin <= 4 ? std::string(names[i]) : "x" + std::to_string(i);
  };
  std::vector<std::string> labels;
  for (int i = 0; i < cfg.d; ++i) labels.push_back(cfg.d == 1 ? "u" : "u" + std::to_string(i));
  labels.emplace_back("c");
  for (int i = 0; i < cfg.d_lin; ++i) labels.push_back(var(i));
  // Same recursion as the feature builder, on names instead of values.
  std::function<void(int, int, std::string)> emit = [&](int degree, int first, std::string acc) {
    if (degree == 0) {
      labels.push_back(acc);
      return;
    }
    for (int j = first; j < cfg.d_lin; ++j) emit(degree - 1, j, acc.empty() ? var(j) : acc + "*" + var(j));
  };
  for (int degree = 2; degree <= cfg.p; ++degree) emit(degree, 0, "");
  return labels;
}

Model obtain_controller_model(const RunConfig& c) {
  if (!c.model.empty()) {
    std::ifstream in(c.model);
    if (!in) throw std::runtime_error("cannot open model file " + c.model);
    Model m = read_model_json(in);
    if (!m.diagnostics.effectiveness_invertible) {
      throw TrainingError("model control effectiveness is not invertible");
    }
    return m;
  }
  DataGenSpec gen;
  gen.m_train = c.m_train.front();
  gen.m_test = c.m_test;
  gen.sigma_u = c.sigma_u;
  gen.sigma_d = 0.0;
  Rng rng = child_stream(c.seed, "control-model");
  return train_controller_model(gen, c.alpha_grid, plant_params(c), FeatureConfig{}, rng);
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  DataGenSpec gen;
  gen.m_train = c.m_train.front();
  gen.m_test = c.m_test;
  gen.sigma_u = c.sigma_u;
  gen.sigma_d = c.sigma_d.front();
  Rng rng = child_stream(c.seed, "train");
  const Dataset data = generate_dataset(gen, plant_params(c), rng);
  TrainOptions opts;
  opts.require_invertible_effectiveness = false;
  const AlphaSearchResult search = grid_search_alpha(data, c.alpha_grid, FeatureConfig{}, opts);
  const Model& model = search.model;
  if (!model.diagnostics.effectiveness_invertible) {
    err << "error: learned control effectiveness is not invertible\n";
    return 1;
  }

  with_output(c.out, out, [&](std::ostream& os) { write_model_json(os, model); });

  std::ostream& report = c.out == "-" ? err : out;
  write_header(report, c);
  report << "alpha," << format_double(search.alpha) << '\n'
         << "test_rmse," << format_double(search.rmse) << '\n'
         << "condition_number," << format_double(model.diagnostics.condition_number) << '\n'
         << "pseudo_inverse," << (model.diagnostics.pseudo_inverse ? 1 : 0) << '\n'
         << "feature,weight\n";
  const auto labels = feature_labels(model.config);
  const Eigen::MatrixXd w = model.weights();
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    report << labels[static_cast<std::size_t>(j)] << ',' << format_double(w(0, j)) << '\n';
  }
  return 0;
}

int cmd_predict_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  PredictionSweepSpec spec;
  spec.m_train_grid = c.m_train;
  spec.sigma_d_levels = c.sigma_d;
  spec.m_test = c.m_test;
  spec.trials = c.trials;
  spec.alpha_grid = c.alpha_grid;
  spec.data.sigma_u = c.sigma_u;
  spec.params = plant_params(c);
  spec.threads = c.threads;
  const SweepResult result = run_prediction_sweep(spec, c.seed);
  for (const auto& cell : result.cells) {
    if (!cell.diagnostic.empty()) {
      err << "warning: cell " << cell.sweep << " M_train=" << cell.cell_param
          << " sigma_d=" << cell.sigma_d << ": " << cell.diagnostic << '\n';
    }
  }
  with_output(c.out, out, [&](std::ostream& os) {
    write_header(os, c);
    write_sweep_csv(os, result);
  });
  return 0;
}

int cmd_control_trace(const RunConfig& c, std::ostream& out, std::ostream&) {
  Model model = obtain_controller_model(c);
  const double sigma_dw = c.sigma_dw.front();
  if (sigma_dw > 0.0) {
    Rng rng = child_stream(c.seed, "weight-perturbation");
    model = perturb_weights(model, sigma_dw, rng);
  }
  const ControlTask task = make_task(parse_task(c.task), plant_params(c), PlantState<double>{c.x0, c.y0});
  const HenonPlant plant(plant_params(c), NoiseSpec{c.sigma_d.front()});

  std::vector<ControlTrace> traces;
  for (double gain : c.k) {
    Rng rng = child_stream(c.seed, "control-noise", {std::bit_cast<std::uint64_t>(gain)});
    ControlTrace trace = run_closed_loop(plant, ControllerConfig{gain, task.target, model}, task.s0,
                                         c.n_iters, rng);
    trace.meta = {gain, c.sigma_d.front(), sigma_dw, c.seed};
    traces.push_back(std::move(trace));
  }
  with_output(c.out, out, [&](std::ostream& os) {
    write_header(os, c);
    for (const auto& t : traces) {
      if (traces.size() > 1) os << "# trace k=" << format_double(t.meta.gain) << '\n';
      if (t.escaped) os << "# escaped at iteration " << *t.escaped_at << '\n';
      write_trace_csv(os, t);
    }
  });
  return 0;
}

int cmd_sweep_k(const RunConfig& c, std::ostream& out, std::ostream&) {
  ControlSweepSpec spec;
  spec.sweep = c.command == "sweep-k" ? "k" : "k-modelerror";
  spec.task = make_task(parse_task(c.task), plant_params(c), PlantState<double>{c.x0, c.y0});
  spec.gains = c.k;
  spec.sigma_d_levels = c.sigma_d;
  spec.sigma_dw_levels = c.sigma_dw;
  spec.n_iters = c.n_iters;
  spec.trials = c.trials;
  spec.training.m_train = c.m_train.front();
  spec.training.m_test = c.m_test;
  spec.training.sigma_u = c.sigma_u;
  spec.alpha_grid = c.alpha_grid;
  spec.params = plant_params(c);
  spec.threads = c.threads;
  const ControlTaskResult result = run_control_task(spec, c.seed);
  with_output(c.out, out, [&](std::ostream& os) {
    write_header(os, c);
    write_sweep_csv(os, result.sweep);
  });
  return 0;
}

// Flag name -> (config key, kind)
enum class Kind { U64, Real, Int, RealList, IntList, Text };
struct FlagSpec {
  const char* flag;
  const char* key;
  Kind kind;
  const char* help;
};

const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs{
      {"--seed", "seed", Kind::U64, "master seed for every random stream"},
      {"--a", "a", Kind::Real, "Hénon parameter a"},
      {"--b", "b", Kind::Real, "Hénon parameter b"},
      {"--g", "g", Kind::Real, "control gain on the plant"},
      {"--sigma-u", "sigma_u", Kind::Real, "std of training perturbations"},
      {"--sigma-d", "sigma_d", Kind::RealList, "plant noise std (list for sweeps)"},
      {"--sigma-dw", "sigma_dw", Kind::RealList, "weight perturbation std"},
      {"--k", "k", Kind::RealList, "closed-loop gains"},
      {"--m-train", "m_train", Kind::IntList, "training set size(s)"},
      {"--m-test", "m_test", Kind::Int, "test set size"},
      {"--n-iters", "n_iters", Kind::Int, "closed-loop iterations"},
      {"--trials", "trials", Kind::Int, "trials per sweep cell"},
      {"--alpha-grid", "alpha_grid", Kind::RealList, "ridge parameter candidates in [0, 1]"},
      {"--task", "task", Kind::Text, "pu1-pu2 | period4 | arbitrary"},
      {"--x0", "x0", Kind::Real, "initial x (default depends on task)"},
      {"--y0", "y0", Kind::Real, "initial y (default depends on task)"},
      {"--model", "model", Kind::Text, "control-trace: model JSON from `train`"},
  };
  return specs;
}

const char* describe(const std::string& command) {
  if (command == "train") return "fit a model, write it as JSON and print a weight report";
  if (command == "predict-sweep") return "prediction RMSE against training size and noise";
  if (command == "control-trace") return "closed-loop trace CSV for each gain";
  if (command == "sweep-k") return "control RMSE against gain and plant noise";
  return "control RMSE against gain with plant noise and weight perturbation";
}

}  // namespace

json RunConfig::echo() const {
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["a"] = a;
  j["b"] = b;
  j["g"] = g;
  j["sigma_u"] = sigma_u;
  j["sigma_d"] = sigma_d;
  j["sigma_dw"] = sigma_dw;
  j["k"] = k;
  j["m_train"] = m_train;
  j["m_test"] = m_test;
  j["n_iters"] = n_iters;
  j["trials"] = trials;
  j["alpha_grid"] = alpha_grid;
  j["task"] = task;
  j["x0"] = x0;
  j["y0"] = y0;
  j["model"] = model;
  return j;
}

RunConfig resolve(const std::string& command, const json& file_layer, const json& flag_layer) {
  require(std::find(std::begin(kCommands), std::end(kCommands), command) != std::end(kCommands),
          "unknown command '" + command + "'");
  json merged = defaults(command);
  for (const json* layer : {&file_layer, &flag_layer}) {
    if (layer->is_null()) continue;
    require(layer->is_object(), "configuration must be a flat JSON object");
    for (const auto& [key, value] : layer->items()) {
      require(std::find(echo_keys().begin(), echo_keys().end(), key) != echo_keys().end(),
              "unknown configuration key '" + key + "'");
      if (key == "command") {
        require(value == command, "configuration is for command " + value.dump());
        continue;
      }
      merged[key] = value;
    }
  }

  RunConfig c;
  try {
    c.command = command;
    const json& seed = merged.at("seed");
    require(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0),
            "seed must be a non-negative integer");
    c.seed = seed.get<std::uint64_t>();
    c.a = merged.at("a").get<double>();
    c.b = merged.at("b").get<double>();
    c.g = merged.at("g").get<double>();
    c.sigma_u = merged.at("sigma_u").get<double>();
    c.sigma_d = as_doubles(merged.at("sigma_d"), "sigma_d");
    if (merged.contains("sigma_dw")) {
      c.sigma_dw = as_doubles(merged.at("sigma_dw"), "sigma_dw");
    } else if (command == "sweep-k-modelerror") {
      c.sigma_dw = c.sigma_d;  // model error as strong as the plant noise
    } else {
      c.sigma_dw = {0.0};
    }
    c.k = as_doubles(merged.at("k"), "k");
    c.m_train = as_longs(merged.at("m_train"), "m_train");
    c.m_test = merged.at("m_test").get<long>();
    c.n_iters = merged.at("n_iters").get<long>();
    c.trials = merged.at("trials").get<long>();
    c.alpha_grid = as_doubles(merged.at("alpha_grid"), "alpha_grid");
    c.task = merged.at("task").get<std::string>();
    c.model = merged.at("model").get<std::string>();
    const ControlTask task = make_task(parse_task(c.task), {c.a, c.b, c.g});
    c.x0 = merged.contains("x0") ? merged.at("x0").get<double>() : task.s0.x;
    c.y0 = merged.contains("y0") ? merged.at("y0").get<double>() : task.s0.y;
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("bad configuration value: ") + e.what());
  }

  auto non_negative = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  };
  require(!c.sigma_d.empty() && non_negative(c.sigma_d), "sigma_d must be non-negative");
  require(!c.sigma_dw.empty() && non_negative(c.sigma_dw), "sigma_dw must be non-negative");
  require(c.sigma_u >= 0.0, "sigma_u must be non-negative");
  require(!c.k.empty(), "at least one gain is required");
  require(!c.m_train.empty() && std::all_of(c.m_train.begin(), c.m_train.end(),
                                            [](long m) { return m >= 1; }),
          "m_train must be positive");
  require(c.m_test >= 1, "m_test must be positive");
  require(c.trials >= 1, "trials must be positive");
  require(c.n_iters >= 1, "n_iters must be positive");
  require(!c.alpha_grid.empty() &&
              std::all_of(c.alpha_grid.begin(), c.alpha_grid.end(),
                          [](double a) { return a >= 0.0 && a <= 1.0; }),
          "alpha grid values must lie in [0, 1]");
  if (command == "train" || command == "control-trace") {
    require(c.sigma_d.size() == 1, command + " takes a single sigma_d");
    require(c.sigma_dw.size() == 1, command + " takes a single sigma_dw");
  }
  if (command != "predict-sweep") require(c.m_train.size() == 1, command + " takes a single m_train");
  if (command == "sweep-k" || command == "sweep-k-modelerror") {
    require(c.n_iters > 150, "sweeps measure iterations 50..150; n_iters must exceed 150");
    require(c.sigma_dw.size() == 1 || c.sigma_dw.size() == c.sigma_d.size(),
            "sigma_dw must be one value or one per sigma_d level");
  }
  return c;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::string line;
  std::istringstream lines(text);
  while (std::getline(lines, line)) {
    if (line.rfind(kConfigPrefix, 0) == 0) return json::parse(line.substr(std::string(kConfigPrefix).size()));
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigurationError("config file " + path + " is neither JSON nor a prior output: " + e.what());
  }
}

int execute(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.command == "train") return cmd_train(config, out, err);
    if (config.command == "predict-sweep") return cmd_predict_sweep(config, out, err);
    if (config.command == "control-trace") return cmd_control_trace(config, out, err);
    return cmd_sweep_k(config, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn and control the Hénon map with a next-generation reservoir computer"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::string out = "-";
    std::string config;
    int threads = 0;
    std::uint64_t u64 = 0;
    std::vector<double> reals;
    std::vector<std::vector<double>> real_lists;
    std::vector<std::vector<long>> int_lists;
    std::vector<long> ints;
    std::vector<std::string> texts;
    std::vector<std::pair<const FlagSpec*, CLI::Option*>> options;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  for (const char* name : kCommands) {
    auto sub = std::make_unique<Sub>();
    sub->app = app.add_subcommand(name, describe(name));
    const std::size_t n = flag_specs().size();
    sub->reals.resize(n);
    sub->real_lists.resize(n);
    sub->int_lists.resize(n);
    sub->ints.resize(n);
    sub->texts.resize(n);
    if (std::string(name) == "train") sub->out = "model.json";
    sub->app->add_option("--out", sub->out, "output path, - for stdout");
    sub->app->add_option("--config", sub->config, "flat JSON config or a previous output file");
    sub->app->add_option("--threads", sub->threads, "worker threads (default: all cores)")
        ->check(CLI::NonNegativeNumber);
    for (std::size_t i = 0; i < n; ++i) {
      const FlagSpec& f = flag_specs()[i];
      CLI::Option* opt = nullptr;
      switch (f.kind) {
        case Kind::U64: opt = sub->app->add_option(f.flag, sub->u64, f.help); break;
        case Kind::Real: opt = sub->app->add_option(f.flag, sub->reals[i], f.help); break;
        case Kind::Int: opt = sub->app->add_option(f.flag, sub->ints[i], f.help); break;
        case Kind::RealList:
          opt = sub->app->add_option(f.flag, sub->real_lists[i], f.help)->delimiter(',');
          break;
        case Kind::IntList:
          opt = sub->app->add_option(f.flag, sub->int_lists[i], f.help)->delimiter(',');
          break;
        case Kind::Text: opt = sub->app->add_option(f.flag, sub->texts[i], f.help); break;
      }
      sub->options.emplace_back(&f, opt);
    }
    subs.push_back(std::move(sub));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (const auto& sub : subs) {
    if (!sub->app->parsed()) continue;
    try {
      json flags = json::object();
      for (std::size_t i = 0; i < sub->options.size(); ++i) {
        const auto& [f, opt] = sub->options[i];
        if (opt->count() == 0) continue;
        switch (f->kind) {
          case Kind::U64: flags[f->key] = sub->u64; break;
          case Kind::Real: flags[f->key] = sub->reals[i]; break;
          case Kind::Int: flags[f->key] = sub->ints[i]; break;
          case Kind::RealList: flags[f->key] = sub->real_lists[i]; break;
          case Kind::IntList: flags[f->key] = sub->int_lists[i]; break;
          case Kind::Text: flags[f->key] = sub->texts[i]; break;
        }
      }
      const json file = sub->config.empty() ? json() : load_config_file(sub->config);
      RunConfig config = resolve(sub->app->get_name(), file, flags);
      config.out = sub->out;
      config.config_path = sub->config;
      config.threads = sub->threads > 0
                           ? sub->threads
                           : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      return execute(config, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 2;
}

}  // namespace ngrc::cli
