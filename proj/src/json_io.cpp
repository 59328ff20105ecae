#include "qsteady/json_io.hpp"

#include <sstream>

namespace qsteady {

json matrix_to_json(const ComplexMatrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
  return out;
}

ComplexMatrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                               const std::string& path) {
  if (!j.is_array()) throw InputError(path + ": matrix must be an array of [re, im] pairs");
  if (static_cast<Eigen::Index>(j.size()) != rows * cols) {
    std::ostringstream msg;
    msg << path << ": expected " << rows * cols << " entries (" << rows << "x" << cols
        << "), got " << j.size();
    throw InputError(msg.str());
  }
  ComplexMatrix m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    const json& e = j[static_cast<size_t>(k)];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      std::ostringstream msg;
      msg << path << "/" << k << ": entry must be a [re, im] number pair";
      throw InputError(msg.str());
    }
    m(k / cols, k % cols) = Complex(e[0].get<double>(), e[1].get<double>());
  }
  return m;
}

json rate_to_json(const RateFunction& r) {
  switch (r.kind()) {
    case RateFunction::Kind::Constant:
      return json{{"kind", "constant"}, {"value", r.constant_value()}};
    case RateFunction::Kind::Expression:
      return json{{"kind", "expr"}, {"expr", r.text()}};
    case RateFunction::Kind::Preset:
      return json{{"kind", "preset"}, {"name", r.preset_name()}, {"params", r.preset_params()}};
  }
  throw InputError("rate_to_json: unreachable");
}

RateFunction rate_from_json(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw InputError(path + ": rate must be an object with a string \"kind\"");
  const std::string kind = j["kind"].get<std::string>();
  try {
    if (kind == "constant") {
      if (!j.contains("value") || !j["value"].is_number())
        throw InputError("constant rate needs a numeric \"value\"");
      return RateFunction::constant(j["value"].get<double>());
    }
    if (kind == "expr") {
      if (!j.contains("expr") || !j["expr"].is_string())
        throw InputError("expr rate needs a string \"expr\"");
      return RateFunction::expression(j["expr"].get<std::string>());
    }
    if (kind == "preset") {
      if (!j.contains("name") || !j["name"].is_string())
        throw InputError("preset rate needs a string \"name\"");
      std::map<std::string, double> params;
      if (j.contains("params")) {
        if (!j["params"].is_object()) throw InputError("preset \"params\" must be an object");
        for (const auto& [key, v] : j["params"].items()) {
          if (!v.is_number()) throw InputError("preset parameter '" + key + "' must be numeric");
          params[key] = v.get<double>();
        }
      }
      return RateFunction::preset(j["name"].get<std::string>(), params);
    }
  } catch (const InputError& err) {
    throw InputError(path + ": " + err.what());
  }
  throw InputError(path + ": unknown rate kind \"" + kind + "\"");
}

json density_to_json(const DensityOperator& rho) {
  return json{{"dimension", rho.dim()}, {"matrix", matrix_to_json(rho.matrix())}};
}

DensityOperator density_from_json(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("dimension") || !j["dimension"].is_number_integer())
    throw InputError(path + ": state document needs an integer \"dimension\"");
  const auto d = j["dimension"].get<Eigen::Index>();
  if (d < 1 || d > 16) throw InputError(path + "/dimension: must be between 1 and 16");
  if (!j.contains("matrix")) throw InputError(path + ": state document needs a \"matrix\"");
  const ComplexMatrix m = matrix_from_json(j["matrix"], d, d, path + "/matrix");
  try {
    return DensityOperator(m);
  } catch (const InputError& err) {
    throw InputError(path + "/matrix: " + err.what());
  }
}

}  // namespace qsteady
