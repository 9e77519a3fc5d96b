#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "ngrc_control/model.hpp"

namespace ngrc {

/// printf("%.17g"): round-trips every double.
std::string format_double(double v);

/// {"alpha": r, "w_u": [[..]], "w_x": [[..]], "config": {"d_lin", "d", "c", "p"}}
/// Matrices are row-major nested arrays; w_x columns follow the feature layout.
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

void write_model_json(std::ostream& os, const Model& model);
Model read_model_json(std::istream& is);

}  // namespace ngrc
