#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "battery.hpp"
#include "qsteady/dynamics.hpp"

using namespace qsteady;

namespace {

GeneratorModel amplitude_damping(const RateFunction& rate) {
  return preset_amplitude_damping(rate);
}

double max_cross_method_distance(const GeneratorModel& model, const DensityOperator& rho0,
                                 double t_max, int steps) {
  const Trajectory ode = evolve_ode(model, rho0, t_max, steps);
  const Trajectory exact = evolve_exact(model, rho0, ode.times);
  double worst = 0.0;
  for (size_t i = 0; i < ode.states.size(); ++i)
    worst = std::max(worst, trace_distance(ode.states[i], exact.states[i]));
  return worst;
}

}  // namespace

TEST_CASE("evolve_ode") {
  SUBCASE("zero generator holds the state constant") {
    Rng rng(41);
    const DensityOperator rho0 = rng.density_operator(2);
    const Trajectory traj = evolve_ode(GeneratorModel(2, {}), rho0, 1.0, 10);
    REQUIRE(traj.states.size() == 11);
    for (const auto& state : traj.states)
      CHECK((state - rho0.matrix()).norm() < 1e-12);
  }
  SUBCASE("constant-rate decay reproduces the closed form") {
    const Trajectory traj =
        evolve_ode(amplitude_damping(RateFunction::constant(1.0)),
                   DensityOperator(basis_state(2, 1)), 2.0, 2000);
    for (size_t i = 0; i < traj.states.size(); i += 250) {
      CHECK(traj.states[i](1, 1).real() ==
            doctest::Approx(std::exp(-traj.times[i])).epsilon(1e-6));
    }
    CHECK(traj.max_trace_drift < 1e-10);
    CHECK(traj.min_eigenvalue > -1e-10);
  }
  SUBCASE("agrees with the exact propagator for mixed rates over [0, 10]") {
    const GeneratorModel model =
        preset_two_qubit_dephasing(RateFunction::constant(1.0), battery::exp_decay_rate());
    Rng rng(42);
    CHECK(max_cross_method_distance(model, rng.density_operator(4), 10.0, 10000) < 1e-6);
  }
  SUBCASE("argument validation") {
    const GeneratorModel model = amplitude_damping(RateFunction::constant(1.0));
    const DensityOperator rho0(basis_state(2, 0));
    CHECK_THROWS_AS(evolve_ode(model, rho0, 1.0, 1), InputError);
    CHECK_THROWS_AS(evolve_ode(model, rho0, -1.0, 10), InputError);
    CHECK_THROWS_AS(evolve_ode(model, DensityOperator(basis_state(3, 0)), 1.0, 10), InputError);
  }
}

TEST_CASE("evolve_exact") {
  SUBCASE("time zero returns the initial state") {
    Rng rng(43);
    const DensityOperator rho0 = rng.density_operator(2);
    const Trajectory traj =
        evolve_exact(amplitude_damping(RateFunction::constant(1.0)), rho0, {0.0});
    REQUIRE(traj.states.size() == 1);
    CHECK((traj.states[0] - rho0.matrix()).norm() < 1e-12);
  }
  SUBCASE("dephasing coherence decays as exp(-2t)/2") {
    const GeneratorModel model = preset_pure_dephasing(1, {RateFunction::constant(1.0)});
    ComplexMatrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    const Trajectory traj =
        evolve_exact(model, DensityOperator(plus), {0.0, 0.5, 1.0, 2.0});
    for (size_t i = 0; i < traj.times.size(); ++i) {
      CHECK(std::abs(traj.states[i](0, 1)) ==
            doctest::Approx(0.5 * std::exp(-2.0 * traj.times[i])).epsilon(1e-10));
    }
  }
  SUBCASE("the double-dot dark state is stationary") {
    const double phase = M_PI / 5.0;
    const GeneratorModel model = preset_double_dot(phase, 0.0, RateFunction::constant(1.0),
                                                   RateFunction::constant(0.0), false);
    ComplexVector dark = ComplexVector::Zero(4);
    dark(2) = 1.0 / std::sqrt(2.0);
    dark(1) = -std::exp(Complex(0.0, -phase)) / std::sqrt(2.0);
    const DensityOperator rho0(ComplexMatrix(dark * dark.adjoint()));
    const Trajectory traj = evolve_exact(model, rho0, {0.0, 1.0, 3.0, 8.0});
    for (const auto& state : traj.states)
      CHECK((state - rho0.matrix()).norm() < 1e-10);
  }
  SUBCASE("non-commuting models are rejected") {
    CHECK_THROWS_AS(evolve_exact(battery::double_dot_both_rates(),
                                 DensityOperator(basis_state(4, 0)), {1.0}),
                    InputError);
  }
}

TEST_CASE("RK4 convergence order") {
  // Smooth oscillating rate in the asymptotic regime h <= 1e-2.
  const GeneratorModel model = amplitude_damping(battery::sine_rate());
  const DensityOperator rho0(basis_state(2, 1));
  const double err_h = max_cross_method_distance(model, rho0, 2.0, 200);
  const double err_h2 = max_cross_method_distance(model, rho0, 2.0, 400);
  CHECK(err_h / err_h2 >= 8.0);  // >= 2^3, observed order is ~4
}

TEST_CASE("attraction_trace") {
  SUBCASE("trajectories inside the manifold have zero distance") {
    const GeneratorModel model =
        preset_two_qubit_dephasing(RateFunction::constant(1.0), RateFunction::constant(1.0));
    const SteadyProjector p = steady_projector(model);
    ComplexVector dfs = ComplexVector::Zero(4);
    dfs(1) = dfs(2) = 1.0 / std::sqrt(2.0);
    const DensityOperator rho0(ComplexMatrix(dfs * dfs.adjoint()));
    const Trajectory traj = evolve_exact(model, rho0, {0.0, 1.0, 5.0});
    const AttractionTrace trace = attraction_trace(traj, p);
    for (double dist : trace.distances) CHECK(dist < 1e-8);
  }
  SUBCASE("constant-rate decay: distance equals the excited population") {
    const GeneratorModel model = amplitude_damping(RateFunction::constant(1.0));
    const SteadyProjector p = steady_projector(model);
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(0.25 * i);
    const Trajectory traj = evolve_exact(model, DensityOperator(basis_state(2, 1)), times);
    const AttractionTrace trace = attraction_trace(traj, p);
    for (size_t i = 0; i < times.size(); ++i)
      CHECK(trace.distances[i] == doctest::Approx(std::exp(-times[i])).epsilon(1e-9));
    CHECK(trace.monotone_envelope);
    // Markovian attractive case: pointwise non-increasing.
    for (size_t i = 1; i < trace.distances.size(); ++i)
      CHECK(trace.distances[i] <= trace.distances[i - 1] + 1e-10);
  }
  SUBCASE("summable rate plateaus at exp(-1)") {
    const GeneratorModel model = amplitude_damping(battery::exp_decay_rate());
    const SteadyProjector p = steady_projector(model);
    std::vector<double> times{0.0, 1.0, 5.0, 20.0, 50.0};
    const Trajectory traj = evolve_exact(model, DensityOperator(basis_state(2, 1)), times);
    const AttractionTrace trace = attraction_trace(traj, p);
    CHECK(trace.final_distance == doctest::Approx(std::exp(-1.0)).epsilon(1e-4));
  }
}

TEST_CASE("verify_attraction") {
  SUBCASE("constant rate attracts everything") {
    const GeneratorModel model = amplitude_damping(RateFunction::constant(1.0));
    const VerifyAttractionReport report =
        verify_attraction(model, steady_projector(model), {}, 50.0, 1e-4);
    CHECK(report.attracted);
    CHECK(report.spectral_attractive);
    CHECK(report.consistent);
    CHECK(report.final_distances.size() == 12);  // 2 basis + 10 random states
  }
  SUBCASE("summable rate leaves a stranded population") {
    const GeneratorModel model = amplitude_damping(battery::exp_decay_rate());
    const VerifyAttractionReport report =
        verify_attraction(model, steady_projector(model), {}, 50.0, 1e-4);
    CHECK_FALSE(report.attracted);
    CHECK_FALSE(report.spectral_attractive);
    CHECK(report.consistent);
    double worst = 0.0;
    for (double dist : report.final_distances) worst = std::max(worst, dist);
    CHECK(worst == doctest::Approx(std::exp(-1.0)).epsilon(1e-4));
  }
  SUBCASE("negative-rate episodes do not stop the attraction") {
    const GeneratorModel model = amplitude_damping(battery::sine_rate());
    const VerifyAttractionReport report =
        verify_attraction(model, steady_projector(model), {}, 50.0, 1e-4);
    CHECK(report.attracted);
    CHECK(report.spectral_attractive);
    CHECK(report.consistent);
  }
  SUBCASE("transient growth during information backflow is permitted") {
    const GeneratorModel model = amplitude_damping(battery::sine_rate());
    const SteadyProjector p = steady_projector(model);
    std::vector<double> times;
    for (int i = 0; i <= 200; ++i) times.push_back(0.25 * i);
    const Trajectory traj = evolve_exact(model, DensityOperator(basis_state(2, 1)), times);
    const AttractionTrace trace = attraction_trace(traj, p);
    bool grew = false;
    for (size_t i = 1; i < trace.distances.size(); ++i)
      if (trace.distances[i] > trace.distances[i - 1] + 1e-12) grew = true;
    CHECK(grew);  // revivals happen while the rate is negative
    CHECK(trace.monotone_envelope);
    CHECK(trace.final_distance < 1e-4);
  }
}

TEST_CASE("trajectory CSV export") {
  const GeneratorModel model = amplitude_damping(RateFunction::constant(1.0));
  const Trajectory traj =
      evolve_exact(model, DensityOperator(basis_state(2, 1)), {0.0, 0.5, 1.0});
  const SteadyProjector p = steady_projector(model);
  const AttractionTrace trace = attraction_trace(traj, p);

  std::ostringstream out;
  write_trajectory_csv(out, traj, &trace.distances);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "t,re_0_0,im_0_0,re_0_1,im_0_1,re_1_0,im_1_0,re_1_1,im_1_1,manifold_distance");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    // Every row carries 1 + 8 + 1 comma-separated 17-digit values.
    CHECK(std::count(line.begin(), line.end(), ',') == 9);
  }
  CHECK(rows == 3);
  // The last row ends with the final distance, round-trippable at 17 digits.
  const size_t last_comma = out.str().rfind(',');
  const double parsed = std::stod(out.str().substr(last_comma + 1));
  CHECK(parsed == doctest::Approx(trace.final_distance).epsilon(1e-15));
}
