#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsteady/json_io.hpp"
#include "qsteady/operators.hpp"
#include "qsteady/random.hpp"
#include "qsteady/rates.hpp"

namespace qsteady {

// Largest Hilbert-space dimension the dense machinery is sized for.
inline constexpr Eigen::Index kMaxHilbertDim = 16;

// ---------------------------------------------------------------------------
// Generator pieces
// ---------------------------------------------------------------------------

// Superoperator of -i[H, .] under column stacking: -i(I (x) H - H^T (x) I).
// Rejects a non-Hermitian H.
SuperOperator hamiltonian_piece(const ComplexMatrix& h);

// Unit-rate dissipator A . A^dag - 1/2 {A^dag A, .}:
// (conj A (x) A) - 1/2 (I (x) A^dag A) - 1/2 ((A^dag A)^T (x) I).
SuperOperator dissipator_piece(const ComplexMatrix& a);

enum class TermSource { Hamiltonian, Dissipator };

// One summand f_k(t) * G_k of a time-dependent generator. Records the
// operator it was built from so models can be written back to disk.
struct GeneratorTerm {
  RateFunction rate;
  SuperOperator piece;
  TermSource source;
  ComplexMatrix source_operator;

  static GeneratorTerm hamiltonian(const ComplexMatrix& h,
                                   RateFunction rate = RateFunction::constant(1.0));
  static GeneratorTerm dissipator(const ComplexMatrix& a, RateFunction rate);
};

// Time-dependent generator L(t) = sum_k f_k(t) G_k with static pieces.
class GeneratorModel {
 public:
  GeneratorModel(Eigen::Index dim, std::vector<GeneratorTerm> terms, std::string name = {});

  Eigen::Index dim() const { return dim_; }
  const std::vector<GeneratorTerm>& terms() const { return terms_; }
  const std::string& name() const { return name_; }

  // L(t) = sum_k f_k(t) G_k.
  SuperOperator generator_at(double t) const;

  // Integral of L over [0, t] = sum_k F_k(t) G_k; equals log of the
  // dynamical map for commuting families.
  SuperOperator integrated_generator(double t) const;

 private:
  Eigen::Index dim_;
  std::vector<GeneratorTerm> terms_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Commutativity of the generator family
// ---------------------------------------------------------------------------

struct CommutativityReport {
  // Rigorous verdict: all pieces commute pairwise (sufficient for
  // [L(t), L(t')] = 0 at all time pairs).
  bool commuting = false;
  double max_pair_residual = 0.0;  // max ||[Gj,Gk]||_F / (||Gj|| ||Gk||)

  // Weaker necessary check: commutators of assembled generators at sampled
  // time pairs. Can pass when pieces do not commute but rates are dependent.
  bool sampled_commuting = false;
  double sampled_residual = 0.0;
  int n_samples = 0;

  double tolerance = 0.0;
};

CommutativityReport check_commutativity(const GeneratorModel& model, double tolerance = 1e-9,
                                        int n_samples = 10, double horizon = 10.0,
                                        std::uint64_t seed = kDefaultSeed);

// Convenience used as a precondition by the spectral and manifold layers.
void require_commuting(const GeneratorModel& model, const std::string& who);

// ---------------------------------------------------------------------------
// Preset models
// ---------------------------------------------------------------------------

// Qubit spontaneous decay: single jump sigma_minus with the given rate.
GeneratorModel preset_amplitude_damping(const RateFunction& rate);

// n independently dephasing qubits: jump sigma_z on each qubit. n <= 4.
GeneratorModel preset_pure_dephasing(int n_qubits, const std::vector<RateFunction>& rates);

// Two qubits with correlated dephasing: rate (g1-g2)/2 on the jump
// sigma_z^A - sigma_z^B and (g1+g2)/2 on sigma_z^A + sigma_z^B.
// Equal constant rates leave only the collective term.
GeneratorModel preset_two_qubit_dephasing(const RateFunction& gamma1, const RateFunction& gamma2);

// Double quantum dot coupled to a fermionic reservoir, two modes under
// Jordan-Wigner (a1 = sm (x) I, a2 = sz (x) sm), collective jump
// A = (a1 + e^{i phase} a2)/sqrt(2). Rates enter as 2*kappa on A and
// 2*kappa_tilde on A^dag; optional Hamiltonian eps*(n1 + n2).
GeneratorModel preset_double_dot(double phase, double epsilon, const RateFunction& kappa,
                                 const RateFunction& kappa_tilde, bool include_hamiltonian);

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------
// Schema:
// { "dimension": int, "name": str?, "hamiltonian": Matrix?,
//   "hamiltonian_rate": Rate?, "terms": [ { "rate": Rate, "jump": Matrix } ] }

GeneratorModel load_model(const json& doc);
json save_model(const GeneratorModel& model);

GeneratorModel load_model_file(const std::string& path);
void save_model_file(const GeneratorModel& model, const std::string& path);

}  // namespace qsteady
