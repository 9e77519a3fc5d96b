#include "ngrc_control/io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

#include "ngrc_control/control.hpp"
#include "ngrc_control/harness.hpp"
#include "ngrc_control/ridge.hpp"

namespace ngrc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                                 const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigurationError(std::string(name) + ": wrong number of rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigurationError(std::string(name) + ": wrong number of columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json model_to_json(const Model& model) {
  nlohmann::json j;
  j["alpha"] = model.alpha;
  j["w_u"] = matrix_to_json(model.w_u);
  j["w_x"] = matrix_to_json(model.w_x);
  j["config"] = {{"d_lin", model.config.d_lin},
                 {"d", model.config.d},
                 {"c", model.config.c},
                 {"p", model.config.p}};
  return j;
}

Model model_from_json(const nlohmann::json& j) {
  try {
    Model m;
    const auto& cfg = j.at("config");
    m.config.d_lin = cfg.at("d_lin").get<int>();
    m.config.d = cfg.at("d").get<int>();
    m.config.c = cfg.at("c").get<double>();
    m.config.p = cfg.at("p").get<int>();
    m.config.validate();
    m.alpha = j.at("alpha").get<double>();
    m.w_u = matrix_from_json(j.at("w_u"), m.config.d, m.config.d, "w_u");
    m.w_x = matrix_from_json(j.at("w_x"), m.config.d, m.config.d_state(), "w_x");
    m.diagnostics.effectiveness_invertible = effectiveness_invertible(m.w_u);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed model JSON: ") + e.what());
  }
}

void write_model_json(std::ostream& os, const Model& model) {
  // nlohmann prints doubles with round-trip precision.
  os << model_to_json(model).dump(2) << '\n';
}

Model read_model_json(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("unreadable model JSON: ") + e.what());
  }
  return model_from_json(j);
}

void write_trace_csv(std::ostream& os, const ControlTrace& trace) {
  os << "iter,x,y,u,x_des,e\n";
  for (const auto& r : trace.records) {
    os << r.iter << ',' << format_double(r.x()) << ',' << format_double(r.y()) << ','
       << format_double(r.u) << ',' << format_double(r.x_des) << ',' << format_double(r.e) << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "sweep,cell_param,sigma_d,sigma_dw,mean_rmse,std_rmse,trials,escaped,alpha\n";
  for (const auto& c : result.cells) {
    os << c.sweep << ',' << format_double(c.cell_param) << ',' << format_double(c.sigma_d) << ','
       << format_double(c.sigma_dw) << ',' << format_double(c.mean_rmse) << ','
       << format_double(c.std_rmse) << ',' << c.trials << ',' << c.escaped << ','
       << format_double(c.alpha) << '\n';
  }
}

}  // namespace ngrc
