#pragma once

#include <string>

#include "json.hpp"
#include "qsteady/operators.hpp"
#include "qsteady/rates.hpp"

namespace qsteady {

using nlohmann::json;

// Matrices are flat row-major arrays of [re, im] pairs; dimensions come from
// the surrounding document. `path` labels errors with the JSON location.
json matrix_to_json(const ComplexMatrix& m);
ComplexMatrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                               const std::string& path);

json rate_to_json(const RateFunction& r);
RateFunction rate_from_json(const json& j, const std::string& path);

// {"dimension": d, "matrix": Matrix} documents for states on disk.
json density_to_json(const DensityOperator& rho);
DensityOperator density_from_json(const json& j, const std::string& path);

}  // namespace qsteady
