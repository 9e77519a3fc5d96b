#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ngrc_control/cli.hpp"
#include "ngrc_control/errors.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ngrc-control");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ngrc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ngrc_control_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> data_rows(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

std::vector<double> fields(const std::string& row) {
  std::vector<double> v;
  std::istringstream in(row);
  std::string cell;
  while (std::getline(in, cell, ',')) v.push_back(std::stod(cell));
  return v;
}

// Relative error |x - x_des| / |x_des| of trace row `i` (after the header).
double trace_relative_error(const std::string& text, std::size_t i) {
  const auto rows = data_rows(text);
  REQUIRE(rows.size() > i + 1);
  CHECK(rows[0] == "iter,x,y,u,x_des,e");
  const auto f = fields(rows[i + 1]);
  return std::abs(f[5]) / std::abs(f[4]);
}

}  // namespace

TEST_CASE("unknown flags and bad values are rejected") {
  CHECK(invoke({"train", "--bogus", "1"}).code != 0);
  CHECK(invoke({"nonsense"}).code != 0);
  CHECK(invoke({}).code != 0);
  CHECK(invoke({"train", "--out", "-", "--alpha-grid", "0,3"}).code == 2);
  CHECK(invoke({"control-trace", "--task", "circle"}).code == 2);
  CHECK(invoke({"sweep-k", "--n-iters", "100"}).code == 2);
}

TEST_CASE("config resolution layers") {
  using nlohmann::json;
  const auto base = ngrc::cli::resolve("train", json(), json());
  CHECK(base.seed == 1);
  CHECK(base.sigma_d == std::vector<double>{0.0});
  CHECK(base.m_train == std::vector<long>{10});

  const auto layered =
      ngrc::cli::resolve("train", json{{"seed", 5}, {"a", 1.3}}, json{{"seed", 7}});
  CHECK(layered.seed == 7);
  CHECK(layered.a == 1.3);

  CHECK_THROWS_AS(ngrc::cli::resolve("train", json{{"colour", 1}}, json()),
                  ngrc::ConfigurationError);
  CHECK_THROWS_AS(ngrc::cli::resolve("train", json{{"command", "sweep-k"}}, json()),
                  ngrc::ConfigurationError);

  const auto me = ngrc::cli::resolve("sweep-k-modelerror", json(), json());
  CHECK(me.sigma_dw == me.sigma_d);
  CHECK(ngrc::cli::resolve("sweep-k", json(), json()).sigma_dw == std::vector<double>{0.0});
  CHECK(ngrc::cli::resolve("sweep-k", json(), json()).k.size() == 81);

  const auto p4 = ngrc::cli::resolve("control-trace", json(), json{{"task", "period4"}});
  CHECK(p4.x0 == -1.0);
  CHECK(p4.y0 == 0.0);
}

TEST_CASE("train recovers the map and is reproducible") {
  const auto model = scratch("model.json");
  const auto r = invoke({"train", "--out", model.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# ngrc-control train\n# config: {", 0) == 0);

  const double expected[] = {1.0, 1.0, 0.0, 1.0, -1.4, 0.0, 0.0};
  const char* labels[] = {"u", "c", "x", "y", "x*x", "x*y", "y*y"};
  const auto rows = data_rows(r.out);
  std::size_t table = 0;
  while (table < rows.size() && rows[table] != "feature,weight") ++table;
  REQUIRE(table + 7 < rows.size() + 1);
  for (std::size_t j = 0; j < 7; ++j) {
    const std::string& row = rows[table + 1 + j];
    const auto comma = row.find(',');
    CHECK(row.substr(0, comma) == labels[j]);
    CHECK(std::abs(std::stod(row.substr(comma + 1)) - expected[j]) <= 1e-6);
  }

  const std::string first = slurp(model);
  const auto again = invoke({"train", "--out", model.string()});
  CHECK(again.out == r.out);
  CHECK(slurp(model) == first);
}

TEST_CASE("train with noise reports a test error near the noise level") {
  const auto r = invoke({"train", "--sigma-d", "1e-2", "--out", scratch("noisy.json").string()});
  REQUIRE(r.code == 0);
  for (const auto& row : data_rows(r.out)) {
    if (row.rfind("test_rmse,", 0) == 0) {
      const double rmse = std::stod(row.substr(10));
      CHECK(rmse >= 0.5e-2);
      CHECK(rmse <= 2e-2);
    }
  }
}

TEST_CASE("control traces converge in one step at zero gain") {
  const auto pu = invoke({"control-trace", "--task", "pu1-pu2", "--k", "0"});
  REQUIRE(pu.code == 0);
  CHECK(trace_relative_error(pu.out, 1) < 1e-10);

  const auto p4 = invoke({"control-trace", "--task", "period4", "--k", "0", "--x0", "-1", "--y0", "0"});
  REQUIRE(p4.code == 0);
  CHECK(trace_relative_error(p4.out, 1) < 1e-9);
}

TEST_CASE("control trace from a saved model") {
  const auto model = scratch("ctl_model.json");
  REQUIRE(invoke({"train", "--out", model.string()}).code == 0);
  const auto r = invoke({"control-trace", "--k", "0", "--model", model.string()});
  REQUIRE(r.code == 0);
  CHECK(trace_relative_error(r.out, 1) < 1e-10);
  CHECK(invoke({"control-trace", "--model", scratch("missing.json").string()}).code == 1);
}

TEST_CASE("noise-free gain sweep") {
  const auto r = invoke({"sweep-k", "--sigma-d", "0", "--trials", "3", "--k",
                         "-0.9,-0.6,-0.3,0,0.3,0.6,0.9"});
  REQUIRE(r.code == 0);
  const auto rows = data_rows(r.out);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == "sweep,cell_param,sigma_d,sigma_dw,mean_rmse,std_rmse,trials,escaped,alpha");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i].substr(rows[i].find(',') + 1));
    // |K| = 0.9 still carries the 0.9^50 transient inside the window.
    if (std::abs(f[0]) <= 0.6) CHECK(f[3] <= 1e-10);
    CHECK(f[6] == 0);
  }
}

TEST_CASE("outputs are byte-identical on rerun and from their own header") {
  const std::vector<std::vector<std::string>> commands{
      {"predict-sweep", "--m-train", "5,10", "--trials", "10", "--threads", "2"},
      {"control-trace", "--sigma-d", "1e-3", "--sigma-dw", "1e-3"},
      {"sweep-k", "--k", "-1.05,0,0.5", "--trials", "5"},
      {"sweep-k-modelerror", "--k", "0,0.5", "--sigma-d", "1e-3,1e-2", "--trials", "5"},
  };
  int n = 0;
  for (auto args : commands) {
    const auto a = scratch("run" + std::to_string(n) + "a.csv");
    const auto b = scratch("run" + std::to_string(n) + "b.csv");
    const auto c = scratch("run" + std::to_string(n) + "c.csv");
    ++n;
    auto with_out = [&](const fs::path& p) {
      auto v = args;
      v.push_back("--out");
      v.push_back(p.string());
      return v;
    };
    REQUIRE(invoke(with_out(a)).code == 0);
    REQUIRE(invoke(with_out(b)).code == 0);
    CHECK(slurp(a) == slurp(b));

    const auto replay = invoke({args[0], "--config", a.string(), "--out", c.string()});
    REQUIRE(replay.code == 0);
    CHECK(slurp(c) == slurp(a));
  }
}
