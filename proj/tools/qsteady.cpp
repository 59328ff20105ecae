// Command-line surface for steady-state manifold analysis of time-local
// master equations with commuting generators. JSON reports go to stdout,
// human diagnostics to stderr.
//
// Exit codes: 0 success, 1 analysis-negative verdict (non-commuting /
// non-attractive), 2 input error, 3 internal verification failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsteady/dynamics.hpp"
#include "qsteady/json_io.hpp"
#include "qsteady/manifold.hpp"
#include "qsteady/models.hpp"
#include "qsteady/spectral.hpp"

namespace {

using namespace qsteady;

constexpr int kSchemaVersion = 1;

void emit(json report) {
  report["schema_version"] = kSchemaVersion;
  std::cout << report.dump(2) << "\n";
}

json cptp_to_json(const CptpReport& report) {
  return json{{"ok", report.ok},
              {"choi_min_eigenvalue", report.choi_min_eigenvalue},
              {"choi_hermiticity_deviation", report.choi_hermiticity_deviation},
              {"tp_deviation", report.tp_deviation}};
}

DensityOperator initial_state(const std::string& state_path, int basis_index,
                              Eigen::Index dim) {
  if (!state_path.empty()) {
    std::ifstream in(state_path);
    if (!in) throw InputError("cannot open state file: " + state_path);
    json doc;
    try {
      in >> doc;
    } catch (const json::parse_error& err) {
      throw InputError("state file " + state_path + ": " + err.what());
    }
    DensityOperator rho = density_from_json(doc, "/");
    if (rho.dim() != dim) throw InputError("state dimension does not match the model");
    return rho;
  }
  if (basis_index >= 0) {
    if (basis_index >= dim) throw InputError("basis state index out of range for the model");
    return DensityOperator(basis_state(dim, basis_index));
  }
  return DensityOperator(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

RateFunction parse_rate_argument(const std::string& text, const std::string& flag) {
  try {
    return RateFunction::expression(text);
  } catch (const ParseError& err) {
    throw InputError(flag + ": " + err.what());
  }
}

int cmd_check_commute(const std::string& model_path, double tolerance, int samples) {
  const GeneratorModel model = load_model_file(model_path);
  const CommutativityReport report = check_commutativity(model, tolerance, samples);
  emit(json{{"commuting", report.commuting},
            {"max_pair_residual", report.max_pair_residual},
            {"sampled_commuting", report.sampled_commuting},
            {"sampled_residual", report.sampled_residual},
            {"n_samples", report.n_samples},
            {"tol", report.tolerance}});
  return report.commuting ? 0 : 1;
}

int cmd_spectrum(const std::string& model_path, std::uint64_t seed) {
  const GeneratorModel model = load_model_file(model_path);
  require_commuting(model, "spectrum");
  const DampingBasis basis = damping_basis(model, seed);
  json report = damping_basis_to_json(basis);
  report["dimension"] = model.dim();
  json terms = json::array();
  for (const auto& term : model.terms())
    terms.push_back(json{
        {"rate", term.rate.describe()},
        {"source", term.source == TermSource::Hamiltonian ? "hamiltonian" : "dissipator"}});
  report["terms"] = terms;
  emit(std::move(report));
  return 0;
}

int cmd_steady(const std::string& model_path, double t_max, int grid_points,
               std::uint64_t seed) {
  const GeneratorModel model = load_model_file(model_path);
  SteadyOptions options;
  options.grid_horizon = t_max;
  options.seed = seed;
  if (grid_points > 0) {
    for (int i = 0; i < grid_points; ++i)
      options.sample_times.push_back(t_max * std::pow(2.0, -(grid_points - 1 - i)));
  }
  const SteadyProjector p = steady_projector(model, options);
  const ComplexMatrix& m = p.map().mat;
  emit(json{{"dimension", p.hilbert_dim()},
            {"sample_times", p.sample_times},
            {"distinct_projectors", p.distinct_projectors},
            {"fixed_space_dim", p.fixed_space().dimension()},
            {"idempotency_residual", (m * m - m).norm()},
            {"cptp", cptp_to_json(is_cptp(p.map()))},
            {"warnings", p.warnings}});
  return 0;
}

int cmd_structure(const std::string& model_path, std::uint64_t seed) {
  const GeneratorModel model = load_model_file(model_path);
  const SteadyProjector p = steady_projector(model, SteadyOptions{.seed = seed});
  const ManifoldStructure structure = structure_decomposition(p, seed);
  json report = manifold_structure_to_json(structure);
  report["dimension"] = structure.hilbert_dim();
  report["fixed_space_dim"] = structure.fixed_space_dim();
  emit(std::move(report));
  return 0;
}

int cmd_attract(const std::string& model_path, double horizon, double threshold, double growth,
                std::uint64_t seed) {
  const GeneratorModel model = load_model_file(model_path);
  const AttractivenessReport report = attractiveness(model, horizon, threshold, growth, seed);
  emit(attractiveness_to_json(report));
  return report.attractive ? 0 : 1;
}

int cmd_project(const std::string& model_path, const std::string& state_path, int basis_index,
                std::uint64_t seed) {
  const GeneratorModel model = load_model_file(model_path);
  const SteadyProjector p = steady_projector(model, SteadyOptions{.seed = seed});
  const DensityOperator rho = initial_state(state_path, basis_index, model.dim());
  const DensityOperator projected = project_to_manifold(p, rho);
  emit(json{{"dimension", model.dim()},
            {"state", matrix_to_json(projected.matrix())},
            {"distance_moved", trace_distance(rho.matrix(), projected.matrix())}});
  return 0;
}

int cmd_simulate(const std::string& model_path, const std::string& state_path, int basis_index,
                 double t_max, int steps, const std::string& method, const std::string& out_path,
                 bool with_distance, std::uint64_t seed) {
  const GeneratorModel model = load_model_file(model_path);
  const DensityOperator rho0 = initial_state(state_path, basis_index, model.dim());

  Trajectory trajectory;
  if (method == "rk4") {
    trajectory = evolve_ode(model, rho0, t_max, steps);
  } else if (method == "exact") {
    std::vector<double> times;
    for (int i = 0; i <= steps; ++i) times.push_back(t_max * i / steps);
    trajectory = evolve_exact(model, rho0, times);
  } else {
    throw InputError("unknown method '" + method + "', expected rk4 or exact");
  }

  json summary{{"method", to_string(trajectory.method)},
               {"t_max", t_max},
               {"steps", steps},
               {"points", trajectory.states.size()},
               {"max_trace_drift", trajectory.max_trace_drift},
               {"min_eigenvalue", trajectory.min_eigenvalue},
               {"final_state", matrix_to_json(trajectory.states.back())}};

  const std::vector<double>* distances = nullptr;
  AttractionTrace trace;
  if (with_distance) {
    const SteadyProjector p = steady_projector(model, SteadyOptions{.seed = seed});
    trace = attraction_trace(trajectory, p);
    distances = &trace.distances;
    summary["final_manifold_distance"] = trace.final_distance;
    summary["monotone_envelope"] = trace.monotone_envelope;
  }

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write trajectory file: " + out_path);
    write_trajectory_csv(out, trajectory, distances);
    summary["csv"] = out_path;
  }
  emit(std::move(summary));
  return 0;
}

int cmd_preset(const std::string& name, const std::string& out_path, const std::string& rate,
               const std::string& gamma1, const std::string& gamma2, const std::string& kappa,
               const std::string& kappa_tilde, double phase, double epsilon,
               bool with_hamiltonian, int qubits, const std::string& rates_csv) {
  GeneratorModel model(1, {});
  if (name == "amplitude-damping") {
    model = preset_amplitude_damping(parse_rate_argument(rate, "--rate"));
  } else if (name == "pure-dephasing") {
    std::vector<RateFunction> rates;
    std::stringstream ss(rates_csv.empty() ? rate : rates_csv);
    std::string item;
    while (std::getline(ss, item, ',')) rates.push_back(parse_rate_argument(item, "--rates"));
    if (rates.size() == 1 && qubits > 1)
      rates.assign(static_cast<size_t>(qubits), rates.front());
    model = preset_pure_dephasing(qubits, rates);
  } else if (name == "two-qubit-dephasing") {
    model = preset_two_qubit_dephasing(parse_rate_argument(gamma1, "--gamma1"),
                                       parse_rate_argument(gamma2, "--gamma2"));
  } else if (name == "double-dot") {
    model = preset_double_dot(phase, epsilon, parse_rate_argument(kappa, "--kappa"),
                              parse_rate_argument(kappa_tilde, "--kappa-tilde"),
                              with_hamiltonian);
  } else {
    throw InputError("unknown preset '" + name +
                     "'; expected amplitude-damping, pure-dephasing, two-qubit-dephasing, or "
                     "double-dot");
  }
  save_model_file(model, out_path);
  emit(json{{"preset", name}, {"path", out_path}, {"terms", model.terms().size()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steady-state manifold analysis for time-local master equations"};
  app.require_subcommand(1);

  std::uint64_t seed = kDefaultSeed;
  app.add_option("--seed", seed, "seed for all randomized linear algebra");

  std::string model_path, state_path, out_path, method = "rk4";
  int basis_index = -1, samples = 10, grid_points = 0, steps = 1000, qubits = 1;
  double tolerance = 1e-9, t_max = 10.0, horizon = 100.0, threshold = 20.0, growth = 1.0;
  bool with_distance = false, with_hamiltonian = false;
  std::string preset_name, rate = "1", gamma1 = "1", gamma2 = "1", kappa = "1",
              kappa_tilde = "0", rates_csv;
  double phase = 0.0, epsilon = 0.0;

  auto* check = app.add_subcommand("check-commute", "test the commutativity condition");
  check->add_option("model", model_path, "model JSON file")->required();
  check->add_option("--tol", tolerance, "pairwise commutator tolerance");
  check->add_option("--samples", samples, "sampled time pairs");

  auto* spectrum = app.add_subcommand("spectrum", "damping-basis spectral decomposition");
  spectrum->add_option("model", model_path)->required();

  auto* steady = app.add_subcommand("steady", "projector onto the steady-state manifold");
  steady->add_option("model", model_path)->required();
  steady->add_option("--t-max", t_max, "horizon of the sampling grid");
  steady->add_option("--grid", grid_points, "number of geometric grid points");

  auto* structure = app.add_subcommand("structure", "block structure of the steady manifold");
  structure->add_option("model", model_path)->required();

  auto* attract = app.add_subcommand("attract", "attractiveness of the steady manifold");
  attract->add_option("model", model_path)->required();
  attract->add_option("--horizon", horizon, "integration horizon");
  attract->add_option("--threshold", threshold, "required accumulated decay");
  attract->add_option("--growth", growth, "required late checkpoint growth");

  auto* project = app.add_subcommand("project", "project a state onto the steady manifold");
  project->add_option("model", model_path)->required();
  project->add_option("--state", state_path, "density-matrix JSON file");
  project->add_option("--basis-state", basis_index, "computational basis index");

  auto* simulate = app.add_subcommand("simulate", "time evolution with CSV export");
  simulate->add_option("model", model_path)->required();
  simulate->add_option("--state", state_path, "density-matrix JSON file");
  simulate->add_option("--basis-state", basis_index, "computational basis index");
  simulate->add_option("--t-max", t_max);
  simulate->add_option("--steps", steps);
  simulate->add_option("--method", method, "rk4 or exact");
  simulate->add_option("--out", out_path, "CSV output path");
  simulate->add_flag("--with-distance", with_distance,
                     "add the manifold-distance column (commuting models)");

  auto* preset = app.add_subcommand("preset", "write a preset model file");
  preset->add_option("name", preset_name, "preset name")->required();
  preset->add_option("--out", out_path, "output model path")->required();
  preset->add_option("--rate", rate, "rate expression (amplitude-damping / pure-dephasing)");
  preset->add_option("--gamma1", gamma1, "first dephasing rate expression");
  preset->add_option("--gamma2", gamma2, "second dephasing rate expression");
  preset->add_option("--kappa", kappa, "particle-gain rate expression");
  preset->add_option("--kappa-tilde", kappa_tilde, "particle-loss rate expression");
  preset->add_option("--phase", phase, "relative tunneling phase");
  preset->add_option("--epsilon", epsilon, "onsite energy");
  preset->add_flag("--with-hamiltonian", with_hamiltonian, "include the onsite Hamiltonian");
  preset->add_option("--qubits", qubits, "qubit count for pure-dephasing");
  preset->add_option("--rates", rates_csv, "comma-separated per-qubit rate expressions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check_commute(model_path, tolerance, samples);
    if (spectrum->parsed()) return cmd_spectrum(model_path, seed);
    if (steady->parsed()) return cmd_steady(model_path, t_max, grid_points, seed);
    if (structure->parsed()) return cmd_structure(model_path, seed);
    if (attract->parsed()) return cmd_attract(model_path, horizon, threshold, growth, seed);
    if (project->parsed()) return cmd_project(model_path, state_path, basis_index, seed);
    if (simulate->parsed())
      return cmd_simulate(model_path, state_path, basis_index, t_max, steps, method, out_path,
                          with_distance, seed);
    if (preset->parsed())
      return cmd_preset(preset_name, out_path, rate, gamma1, gamma2, kappa, kappa_tilde, phase,
                        epsilon, with_hamiltonian, qubits, rates_csv);
  } catch (const InputError& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return 2;
  } catch (const VerificationError& err) {
    std::cerr << "verification failure: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  }
  return 2;
}
