#pragma once

// Shared model instances exercised across test suites.

#include <cmath>
#include <string>
#include <vector>

#include "qsteady/models.hpp"

namespace battery {

using qsteady::GeneratorModel;
using qsteady::RateFunction;

struct NamedModel {
  std::string name;
  GeneratorModel model;
};

inline RateFunction exp_decay_rate() {
  return RateFunction::preset("exp-decay", {{"amplitude", 1.0}, {"decay", 1.0}});
}

inline RateFunction sine_rate() {
  return RateFunction::preset("sine-offset",
                              {{"offset", 1.0}, {"amplitude", 2.0}, {"frequency", 1.0}});
}

// Every commuting preset the acceptance criteria sweep over.
inline std::vector<NamedModel> commuting_battery() {
  using qsteady::preset_amplitude_damping;
  using qsteady::preset_double_dot;
  using qsteady::preset_pure_dephasing;
  using qsteady::preset_two_qubit_dephasing;
  std::vector<NamedModel> models;
  models.push_back({"amplitude-damping-const", preset_amplitude_damping(RateFunction::constant(1.0))});
  models.push_back({"amplitude-damping-exp", preset_amplitude_damping(exp_decay_rate())});
  models.push_back({"amplitude-damping-sine", preset_amplitude_damping(sine_rate())});
  models.push_back({"dephasing-1q", preset_pure_dephasing(1, {RateFunction::constant(1.0)})});
  models.push_back(
      {"dephasing-3q", preset_pure_dephasing(3, {RateFunction::constant(1.0),
                                                 RateFunction::constant(0.5),
                                                 RateFunction::constant(0.25)})});
  models.push_back({"two-qubit-independent",
                    preset_two_qubit_dephasing(RateFunction::constant(1.0),
                                               RateFunction::constant(1.0 / 3.0))});
  models.push_back({"two-qubit-collective",
                    preset_two_qubit_dephasing(RateFunction::constant(1.0),
                                               RateFunction::constant(1.0))});
  models.push_back({"two-qubit-mixed-rates",
                    preset_two_qubit_dephasing(RateFunction::constant(1.0), exp_decay_rate())});
  models.push_back({"double-dot-dark",
                    preset_double_dot(M_PI / 3.0, 0.0, RateFunction::constant(1.0),
                                      RateFunction::constant(0.0), false)});
  models.push_back({"double-dot-hamiltonian",
                    preset_double_dot(0.0, 0.7, RateFunction::constant(1.0),
                                      RateFunction::constant(0.0), true)});
  return models;
}

inline GeneratorModel double_dot_both_rates() {
  return qsteady::preset_double_dot(0.4, 0.0, RateFunction::constant(1.0),
                                    RateFunction::constant(0.5), false);
}

}  // namespace battery
