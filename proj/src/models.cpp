#include "qsteady/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace qsteady {

namespace {

const Complex kI(0.0, 1.0);

void check_piece_preserves_trace(const SuperOperator& g, const std::string& who) {
  // dual(G)(I) = 0: the generator piece must not create or destroy trace.
  const ComplexMatrix dual_of_identity =
      dual_map(g).apply(ComplexMatrix::Identity(g.hilbert_dim, g.hilbert_dim));
  const double scale = std::max(1.0, g.mat.norm());
  if (dual_of_identity.norm() > 1e-10 * scale)
    throw VerificationError(who + ": piece is not trace-preserving at generator level");
}

}  // namespace

SuperOperator hamiltonian_piece(const ComplexMatrix& h) {
  if (h.rows() != h.cols()) throw InputError("hamiltonian_piece: H must be square");
  const double scale = std::max(1.0, h.norm());
  if ((h - h.adjoint()).norm() > 1e-10 * scale)
    throw InputError("hamiltonian_piece: H is not Hermitian");
  const Eigen::Index d = h.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  return SuperOperator(-kI * (kron(id, h) - kron(h.transpose(), id)), d);
}

SuperOperator dissipator_piece(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) throw InputError("dissipator_piece: A must be square");
  const Eigen::Index d = a.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix ada = a.adjoint() * a;
  ComplexMatrix m = kron(a.conjugate(), a);
  m -= 0.5 * kron(id, ada);
  m -= 0.5 * kron(ada.transpose(), id);
  return SuperOperator(std::move(m), d);
}

GeneratorTerm GeneratorTerm::hamiltonian(const ComplexMatrix& h, RateFunction rate) {
  SuperOperator piece = hamiltonian_piece(h);
  check_piece_preserves_trace(piece, "GeneratorTerm::hamiltonian");
  return GeneratorTerm{std::move(rate), std::move(piece), TermSource::Hamiltonian, h};
}

GeneratorTerm GeneratorTerm::dissipator(const ComplexMatrix& a, RateFunction rate) {
  SuperOperator piece = dissipator_piece(a);
  check_piece_preserves_trace(piece, "GeneratorTerm::dissipator");
  return GeneratorTerm{std::move(rate), std::move(piece), TermSource::Dissipator, a};
}

GeneratorModel::GeneratorModel(Eigen::Index dim, std::vector<GeneratorTerm> terms,
                               std::string name)
    : dim_(dim), terms_(std::move(terms)), name_(std::move(name)) {
  if (dim_ < 1 || dim_ > kMaxHilbertDim) {
    std::ostringstream msg;
    msg << "GeneratorModel: dimension " << dim_ << " outside supported range [1, "
        << kMaxHilbertDim << "]";
    throw InputError(msg.str());
  }
  int n_hamiltonian = 0;
  for (size_t k = 0; k < terms_.size(); ++k) {
    if (terms_[k].piece.hilbert_dim != dim_) {
      std::ostringstream msg;
      msg << "GeneratorModel: term " << k << " acts on dimension " << terms_[k].piece.hilbert_dim
          << ", expected " << dim_;
      throw InputError(msg.str());
    }
    if (terms_[k].source == TermSource::Hamiltonian) ++n_hamiltonian;
  }
  if (n_hamiltonian > 1)
    throw InputError("GeneratorModel: at most one Hamiltonian term is supported");
}

SuperOperator GeneratorModel::generator_at(double t) const {
  ComplexMatrix m = ComplexMatrix::Zero(dim_ * dim_, dim_ * dim_);
  for (const auto& term : terms_) m += term.rate.eval(t) * term.piece.mat;
  return SuperOperator(std::move(m), dim_);
}

SuperOperator GeneratorModel::integrated_generator(double t) const {
  ComplexMatrix m = ComplexMatrix::Zero(dim_ * dim_, dim_ * dim_);
  for (const auto& term : terms_) m += term.rate.integral(t) * term.piece.mat;
  return SuperOperator(std::move(m), dim_);
}

// ---------------------------------------------------------------------------

CommutativityReport check_commutativity(const GeneratorModel& model, double tolerance,
                                        int n_samples, double horizon, std::uint64_t seed) {
  CommutativityReport report;
  report.tolerance = tolerance;
  report.n_samples = n_samples;

  const auto& terms = model.terms();
  for (size_t j = 0; j < terms.size(); ++j) {
    for (size_t k = j + 1; k < terms.size(); ++k) {
      const ComplexMatrix& gj = terms[j].piece.mat;
      const ComplexMatrix& gk = terms[k].piece.mat;
      const double denom = gj.norm() * gk.norm();
      if (denom == 0.0) continue;
      const double residual = (gj * gk - gk * gj).norm() / denom;
      report.max_pair_residual = std::max(report.max_pair_residual, residual);
    }
  }
  report.commuting = report.max_pair_residual <= tolerance;

  Rng rng(seed);
  for (int s = 0; s < n_samples; ++s) {
    const double t1 = rng.uniform() * horizon;
    const double t2 = rng.uniform() * horizon;
    const ComplexMatrix l1 = model.generator_at(t1).mat;
    const ComplexMatrix l2 = model.generator_at(t2).mat;
    const double denom = l1.norm() * l2.norm();
    if (denom == 0.0) continue;
    report.sampled_residual =
        std::max(report.sampled_residual, (l1 * l2 - l2 * l1).norm() / denom);
  }
  report.sampled_commuting = report.sampled_residual <= 10.0 * tolerance;
  return report;
}

void require_commuting(const GeneratorModel& model, const std::string& who) {
  const CommutativityReport report = check_commutativity(model);
  if (!report.commuting) {
    std::ostringstream msg;
    msg << who << ": generator pieces do not commute pairwise (max normalized residual "
        << report.max_pair_residual << ")";
    throw InputError(msg.str());
  }
}

// ---------------------------------------------------------------------------

GeneratorModel preset_amplitude_damping(const RateFunction& rate) {
  std::vector<GeneratorTerm> terms;
  if (!rate.is_zero()) terms.push_back(GeneratorTerm::dissipator(pauli_minus(), rate));
  return GeneratorModel(2, std::move(terms), "amplitude-damping");
}

GeneratorModel preset_pure_dephasing(int n_qubits, const std::vector<RateFunction>& rates) {
  if (n_qubits < 1 || n_qubits > 4)
    throw InputError("preset_pure_dephasing: number of qubits must be between 1 and 4");
  if (rates.size() != static_cast<size_t>(n_qubits))
    throw InputError("preset_pure_dephasing: need one rate per qubit");
  const Eigen::Index d = Eigen::Index(1) << n_qubits;
  std::vector<GeneratorTerm> terms;
  for (int q = 0; q < n_qubits; ++q) {
    if (rates[q].is_zero()) continue;
    const Eigen::Index left = Eigen::Index(1) << q;
    const Eigen::Index right = d / (2 * left);
    const ComplexMatrix jump =
        kron(kron(ComplexMatrix::Identity(left, left), pauli_z()),
             ComplexMatrix::Identity(right, right));
    terms.push_back(GeneratorTerm::dissipator(jump, rates[q]));
  }
  return GeneratorModel(d, std::move(terms), "pure-dephasing");
}

GeneratorModel preset_two_qubit_dephasing(const RateFunction& gamma1,
                                          const RateFunction& gamma2) {
  const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
  const ComplexMatrix za = kron(pauli_z(), id);
  const ComplexMatrix zb = kron(id, pauli_z());
  const RateFunction half_difference = RateFunction::scaled_sum(0.5, gamma1, -0.5, gamma2);
  const RateFunction half_sum = RateFunction::scaled_sum(0.5, gamma1, 0.5, gamma2);
  std::vector<GeneratorTerm> terms;
  if (!half_difference.is_zero())
    terms.push_back(GeneratorTerm::dissipator(za - zb, half_difference));
  if (!half_sum.is_zero()) terms.push_back(GeneratorTerm::dissipator(za + zb, half_sum));
  return GeneratorModel(4, std::move(terms), "two-qubit-dephasing");
}

GeneratorModel preset_double_dot(double phase, double epsilon, const RateFunction& kappa,
                                 const RateFunction& kappa_tilde, bool include_hamiltonian) {
  const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
  const ComplexMatrix a1 = kron(pauli_minus(), id);
  const ComplexMatrix a2 = kron(pauli_z(), pauli_minus());
  const ComplexMatrix jump = (a1 + std::exp(kI * phase) * a2) / std::sqrt(2.0);

  std::vector<GeneratorTerm> terms;
  if (include_hamiltonian && epsilon != 0.0) {
    const ComplexMatrix number_op = a1.adjoint() * a1 + a2.adjoint() * a2;
    terms.push_back(GeneratorTerm::hamiltonian(epsilon * number_op));
  }
  const RateFunction in_rate = RateFunction::scaled(2.0, kappa);
  const RateFunction out_rate = RateFunction::scaled(2.0, kappa_tilde);
  if (!in_rate.is_zero()) terms.push_back(GeneratorTerm::dissipator(jump, in_rate));
  if (!out_rate.is_zero()) terms.push_back(GeneratorTerm::dissipator(jump.adjoint(), out_rate));
  return GeneratorModel(4, std::move(terms), "double-dot");
}

// ---------------------------------------------------------------------------

GeneratorModel load_model(const json& doc) {
  if (!doc.is_object()) throw InputError("/: model document must be a JSON object");
  if (!doc.contains("dimension") || !doc["dimension"].is_number_integer())
    throw InputError("/dimension: required integer field");
  const auto d = doc["dimension"].get<Eigen::Index>();
  if (d < 1 || d > kMaxHilbertDim)
    throw InputError("/dimension: must be between 1 and " + std::to_string(kMaxHilbertDim));

  std::string name;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw InputError("/name: must be a string");
    name = doc["name"].get<std::string>();
  }

  std::vector<GeneratorTerm> terms;
  if (doc.contains("hamiltonian")) {
    const ComplexMatrix h = matrix_from_json(doc["hamiltonian"], d, d, "/hamiltonian");
    RateFunction rate = RateFunction::constant(1.0);
    if (doc.contains("hamiltonian_rate"))
      rate = rate_from_json(doc["hamiltonian_rate"], "/hamiltonian_rate");
    try {
      terms.push_back(GeneratorTerm::hamiltonian(h, std::move(rate)));
    } catch (const InputError& err) {
      throw InputError(std::string("/hamiltonian: ") + err.what());
    }
  } else if (doc.contains("hamiltonian_rate")) {
    throw InputError("/hamiltonian_rate: present without a hamiltonian");
  }

  if (!doc.contains("terms") || !doc["terms"].is_array())
    throw InputError("/terms: required array field");
  for (size_t k = 0; k < doc["terms"].size(); ++k) {
    const std::string path = "/terms/" + std::to_string(k);
    const json& term = doc["terms"][k];
    if (!term.is_object() || !term.contains("rate") || !term.contains("jump"))
      throw InputError(path + ": term needs \"rate\" and \"jump\"");
    RateFunction rate = rate_from_json(term["rate"], path + "/rate");
    const ComplexMatrix jump = matrix_from_json(term["jump"], d, d, path + "/jump");
    terms.push_back(GeneratorTerm::dissipator(jump, std::move(rate)));
  }

  for (const auto& [key, _] : doc.items()) {
    if (key != "dimension" && key != "name" && key != "hamiltonian" &&
        key != "hamiltonian_rate" && key != "terms")
      throw InputError("/" + key + ": unknown field");
  }
  return GeneratorModel(d, std::move(terms), std::move(name));
}

json save_model(const GeneratorModel& model) {
  json doc;
  doc["dimension"] = model.dim();
  if (!model.name().empty()) doc["name"] = model.name();
  doc["terms"] = json::array();
  for (const auto& term : model.terms()) {
    if (term.source == TermSource::Hamiltonian) {
      doc["hamiltonian"] = matrix_to_json(term.source_operator);
      doc["hamiltonian_rate"] = rate_to_json(term.rate);
    } else {
      doc["terms"].push_back(
          json{{"rate", rate_to_json(term.rate)}, {"jump", matrix_to_json(term.source_operator)}});
    }
  }
  return doc;
}

GeneratorModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& err) {
    throw InputError("model file " + path + ": " + err.what());
  }
  return load_model(doc);
}

void save_model_file(const GeneratorModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file: " + path);
  out << save_model(model).dump(2) << "\n";
}

}  // namespace qsteady
