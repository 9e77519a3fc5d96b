#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ngrc::cli {

inline constexpr const char* kCommands[] = {"train", "predict-sweep", "control-trace", "sweep-k",
                                            "sweep-k-modelerror"};

/// Fully resolved run configuration. Everything here except `out`,
/// `threads` and `config_path` is echoed into the output header and is
/// enough to reproduce the output.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string config_path;
  int threads = 1;

  double a = 1.4;
  double b = 0.3;
  double g = 1.0;
  double sigma_u = 0.1;
  std::vector<double> sigma_d;
  std::vector<double> sigma_dw;
  std::vector<double> k;
  std::vector<long> m_train;
  long m_test = 50;
  long n_iters = 200;
  long trials = 100;
  std::vector<double> alpha_grid;
  std::string task = "pu1-pu2";
  double x0 = 0.0;
  double y0 = 0.0;
  std::string model;  ///< control-trace: load this model instead of training one

  /// The echoed keys as a flat JSON object.
  [[nodiscard]] nlohmann::json echo() const;
};

/// Defaults for `command` layered under the config file and explicit flags.
/// Throws ConfigurationError on unknown keys or invalid values.
RunConfig resolve(const std::string& command, const nlohmann::json& file_layer,
                  const nlohmann::json& flag_layer);

/// Reads a flat JSON config, or the `# config: {...}` header of a previous
/// output file.
nlohmann::json load_config_file(const std::string& path);

/// Executes a resolved configuration. Primary output goes to the file named
/// by config.out, or to `out` when that is "-". Returns the exit code.
int execute(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ngrc::cli
