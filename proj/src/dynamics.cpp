#include "qsteady/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace qsteady {

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  Eigen::JacobiSVD<ComplexMatrix> svd(a - b);
  return 0.5 * svd.singularValues().sum();
}

const char* to_string(EvolveMethod m) { return m == EvolveMethod::Rk4 ? "rk4" : "exact"; }

namespace {

void record_state(Trajectory& trajectory, double t, ComplexMatrix state, size_t step) {
  const double trace = state.trace().real();
  const double drift = std::abs(state.trace() - Complex(1.0));
  trajectory.max_trace_drift = std::max(trajectory.max_trace_drift, drift);
  if (drift > 1e-8) {
    std::ostringstream msg;
    msg << "evolution: trace drifted by " << drift << " at step " << step << " (t = " << t
        << "); reduce the step size";
    throw VerificationError(msg.str());
  }
  state /= trace;

  const double herm = (state - state.adjoint()).norm();
  if (herm > 1e-8) {
    std::ostringstream msg;
    msg << "evolution: state lost Hermiticity by " << herm << " at step " << step;
    throw VerificationError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (state + state.adjoint()),
                                                  Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  trajectory.min_eigenvalue = std::min(trajectory.min_eigenvalue, min_eig);
  if (min_eig < -1e-6) {
    std::ostringstream msg;
    msg << "evolution: state turned negative (min eigenvalue " << min_eig << ") at step "
        << step << " (t = " << t << "); reduce the step size";
    throw VerificationError(msg.str());
  }
  trajectory.times.push_back(t);
  trajectory.states.push_back(std::move(state));
}

}  // namespace

Trajectory evolve_ode(const GeneratorModel& model, const DensityOperator& rho0, double t_max,
                      int steps) {
  if (steps < 2) throw InputError("evolve_ode: need at least 2 steps");
  if (t_max <= 0.0) throw InputError("evolve_ode: t_max must be positive");
  if (rho0.dim() != model.dim()) throw InputError("evolve_ode: state dimension mismatch");

  Trajectory trajectory;
  trajectory.method = EvolveMethod::Rk4;
  const double h = t_max / steps;
  ComplexVector v = vectorize(rho0.matrix());
  record_state(trajectory, 0.0, rho0.matrix(), 0);

  for (int n = 0; n < steps; ++n) {
    const double t = n * h;
    const ComplexMatrix l0 = model.generator_at(t).mat;
    const ComplexMatrix lh = model.generator_at(t + 0.5 * h).mat;
    const ComplexMatrix l1 = model.generator_at(t + h).mat;
    const ComplexVector k1 = l0 * v;
    const ComplexVector k2 = lh * (v + 0.5 * h * k1);
    const ComplexVector k3 = lh * (v + 0.5 * h * k2);
    const ComplexVector k4 = l1 * (v + h * k3);
    v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    record_state(trajectory, (n + 1) * h, devectorize(v, model.dim()), n + 1);
    v = vectorize(trajectory.states.back());  // carry the renormalized state
  }
  return trajectory;
}

Trajectory evolve_exact(const GeneratorModel& model, const DensityOperator& rho0,
                        const std::vector<double>& times) {
  require_commuting(model, "evolve_exact");
  if (rho0.dim() != model.dim()) throw InputError("evolve_exact: state dimension mismatch");
  for (double t : times)
    if (t < 0.0) throw InputError("evolve_exact: times must be nonnegative");

  const DampingBasis basis = damping_basis(model);
  Trajectory trajectory;
  trajectory.method = EvolveMethod::Exact;

  if (basis.diagonalizable) {
    const Eigen::Index n = model.dim() * model.dim();
    ComplexMatrix v(n, n), w(n, n);
    for (Eigen::Index mu = 0; mu < n; ++mu) {
      v.col(mu) = vectorize(basis.modes[mu].right);
      w.row(mu) = vectorize(basis.modes[mu].left).adjoint();
    }
    const ComplexVector weights = w * vectorize(rho0.matrix());
    for (size_t i = 0; i < times.size(); ++i) {
      ComplexVector scaled(n);
      ComplexVector integrals(model.terms().size());
      for (size_t k = 0; k < model.terms().size(); ++k)
        integrals(k) = model.terms()[k].rate.integral(times[i]);
      for (Eigen::Index mu = 0; mu < n; ++mu) {
        Complex exponent(0.0, 0.0);
        for (Eigen::Index k = 0; k < basis.modes[mu].coeffs.size(); ++k)
          exponent += integrals(k) * basis.modes[mu].coeffs(k);
        scaled(mu) = std::exp(exponent) * weights(mu);
      }
      record_state(trajectory, times[i], devectorize(v * scaled, model.dim()), i);
    }
  } else {
    for (size_t i = 0; i < times.size(); ++i)
      record_state(trajectory, times[i],
                   propagator_expm(model, times[i]).apply(rho0.matrix()), i);
  }
  return trajectory;
}

AttractionTrace attraction_trace(const Trajectory& trajectory, const SteadyProjector& p) {
  if (!trajectory.states.empty() && trajectory.states.front().rows() != p.hilbert_dim())
    throw InputError("attraction_trace: dimension mismatch");

  AttractionTrace trace;
  trace.times = trajectory.times;
  for (const auto& state : trajectory.states)
    trace.distances.push_back(trace_distance(state, p.map().apply(state)));
  if (!trace.distances.empty()) trace.final_distance = trace.distances.back();

  if (!trace.times.empty()) {
    const double horizon = trace.times.back();
    auto value_at = [&](double target) {
      size_t best = 0;
      for (size_t i = 1; i < trace.times.size(); ++i)
        if (std::abs(trace.times[i] - target) < std::abs(trace.times[best] - target)) best = i;
      return trace.distances[best];
    };
    const double quarter = value_at(horizon / 4.0);
    const double half = value_at(horizon / 2.0);
    const double full = trace.distances.back();
    trace.monotone_envelope = half <= quarter + 1e-10 && full <= half + 1e-10;
  }
  return trace;
}

VerifyAttractionReport verify_attraction(const GeneratorModel& model, const SteadyProjector& p,
                                         std::vector<DensityOperator> initial_states,
                                         double horizon, double tolerance, std::uint64_t seed) {
  require_commuting(model, "verify_attraction");
  const Eigen::Index d = model.dim();
  if (initial_states.empty()) {
    for (Eigen::Index k = 0; k < d; ++k) initial_states.emplace_back(basis_state(d, k));
    Rng rng(seed);
    for (int i = 0; i < 10; ++i) initial_states.push_back(rng.density_operator(d));
  }

  VerifyAttractionReport report;
  report.horizon = horizon;
  report.tolerance = tolerance;

  const SuperOperator lam = propagator(model, horizon);
  report.attracted = true;
  for (const auto& rho : initial_states) {
    if (rho.dim() != d) throw InputError("verify_attraction: state dimension mismatch");
    const ComplexMatrix final_state = lam.apply(rho.matrix());
    const double dist = trace_distance(final_state, p.map().apply(final_state));
    report.final_distances.push_back(dist);
    report.attracted = report.attracted && dist <= tolerance;
  }

  report.spectral_attractive = attractiveness(model, horizon).attractive;
  report.consistent = report.attracted == report.spectral_attractive;
  if (!report.consistent)
    report.note =
        "trajectory and spectral verdicts disagree; the finite-horizon trajectory test is the "
        "weaker check and transient decay can fall below tolerance before the integrals settle";
  return report;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const std::vector<double>* manifold_distances) {
  if (manifold_distances && manifold_distances->size() != trajectory.states.size())
    throw InputError("write_trajectory_csv: distance column length mismatch");

  const Eigen::Index d = trajectory.states.empty() ? 0 : trajectory.states.front().rows();
  out << "t";
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out << ",re_" << i << "_" << j << ",im_" << i << "_" << j;
  if (manifold_distances) out << ",manifold_distance";
  out << "\n";

  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.16e", v);
    out << buf;
  };
  for (size_t n = 0; n < trajectory.states.size(); ++n) {
    put(trajectory.times[n]);
    const ComplexMatrix& state = trajectory.states[n];
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        out << ",";
        put(state(i, j).real());
        out << ",";
        put(state(i, j).imag());
      }
    if (manifold_distances) {
      out << ",";
      put((*manifold_distances)[n]);
    }
    out << "\n";
  }
}

}  // namespace qsteady
