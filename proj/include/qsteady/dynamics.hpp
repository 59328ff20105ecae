#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qsteady/manifold.hpp"

namespace qsteady {

// 1/2 ||A - B||_1, the halved sum of singular values of the difference.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

enum class EvolveMethod { Rk4, Exact };

const char* to_string(EvolveMethod m);

struct Trajectory {
  std::vector<double> times;
  std::vector<ComplexMatrix> states;
  EvolveMethod method = EvolveMethod::Rk4;
  double max_trace_drift = 0.0;  // before per-step renormalization
  double min_eigenvalue = 0.0;   // most negative eigenvalue along the path
};

// Classical fixed-step RK4 for d rho/dt = L(t) rho, storing every step.
// States are renormalized in trace only; drift beyond 1e-8 or negativity
// beyond 1e-6 aborts with a step report.
Trajectory evolve_ode(const GeneratorModel& model, const DensityOperator& rho0, double t_max,
                      int steps);

// Evolution through the exact propagator at the given time points.
Trajectory evolve_exact(const GeneratorModel& model, const DensityOperator& rho0,
                        const std::vector<double>& times);

struct AttractionTrace {
  std::vector<double> times;
  std::vector<double> distances;  // trace distance to the projected state
  double final_distance = 0.0;
  bool monotone_envelope = false;  // checkpoints at T/4, T/2, T non-increasing
};

AttractionTrace attraction_trace(const Trajectory& trajectory, const SteadyProjector& p);

struct VerifyAttractionReport {
  std::vector<double> final_distances;  // one per initial state
  bool attracted = false;               // all final distances <= tolerance
  double horizon = 0.0;
  double tolerance = 0.0;
  bool spectral_attractive = false;  // verdict of the damping-mode analysis
  bool consistent = true;            // trajectory and spectral verdicts agree
  std::string note;
};

// Evolves a family of initial states (computational basis plus fixed-seed
// random states when none are given) to the horizon and compares the final
// manifold distance against the spectral attractiveness verdict. The
// finite-horizon trajectory test is the weaker side of the comparison.
VerifyAttractionReport verify_attraction(const GeneratorModel& model, const SteadyProjector& p,
                                         std::vector<DensityOperator> initial_states = {},
                                         double horizon = 50.0, double tolerance = 1e-4,
                                         std::uint64_t seed = kDefaultSeed);

// CSV export: header, then per row t, Re/Im of each density-matrix entry in
// row-major order, and the manifold distance when provided. 17 significant
// digits throughout.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const std::vector<double>* manifold_distances = nullptr);

}  // namespace qsteady
