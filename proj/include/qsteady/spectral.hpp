#pragma once

#include <string>
#include <vector>

#include "qsteady/models.hpp"

namespace qsteady {

// ---------------------------------------------------------------------------
// Damping basis: simultaneous spectral decomposition of a commuting family
// ---------------------------------------------------------------------------

// One spectral mode. The spectral parameter of the assembled generator is
// lambda_mu(t) = sum_k f_k(t) * coeffs[k], with time-independent right/left
// eigenmatrices satisfying Tr(L_mu^dag R_nu) = delta_{mu,nu}.
struct DampingMode {
  ComplexVector coeffs;  // one eigenvalue per model term
  ComplexMatrix right;
  ComplexMatrix left;
};

struct DampingBasis {
  std::vector<DampingMode> modes;  // empty when not diagonalizable
  bool diagonalizable = true;
  double condition_number = 1.0;  // of the eigenvector matrix

  // lambda_mu(t) for the given model.
  Complex eigenvalue_at(const GeneratorModel& model, size_t mu, double t) const;
};

// Joint eigendecomposition of all generator pieces. Requires pairwise
// commuting pieces; a defective family is flagged, not fatal.
DampingBasis damping_basis(const GeneratorModel& model, std::uint64_t seed = kDefaultSeed);

// ---------------------------------------------------------------------------
// Exact propagators
// ---------------------------------------------------------------------------

// Dynamical map Lambda(t) = sum_mu exp(int_0^t lambda_mu) R_mu Tr(L_mu^dag .).
// Falls back to the dense matrix exponential of the integrated generator
// when the basis is not diagonalizable.
SuperOperator propagator(const GeneratorModel& model, const DampingBasis& basis, double t);
SuperOperator propagator(const GeneratorModel& model, double t);

// exp(sum_k F_k(t) G_k) by dense matrix exponential; agrees with the
// spectral path on diagonalizable families.
SuperOperator propagator_expm(const GeneratorModel& model, double t);

// ---------------------------------------------------------------------------
// Attractiveness of the steady-state manifold
// ---------------------------------------------------------------------------

// Re int_0^T lambda_mu(t) dt, closed form when the rates declare one.
double mode_rate_integral(const GeneratorModel& model, const DampingBasis& basis, size_t mu,
                          double horizon);

enum class ModeClass { Steady, Decaying, Persistent };

const char* to_string(ModeClass c);

struct ModeReport {
  ComplexVector coeffs;
  ModeClass classification = ModeClass::Persistent;
  std::vector<double> checkpoint_times;   // {T/8, T/4, T/2, T}
  std::vector<double> checkpoint_decay;   // g(T') = -Re int_0^{T'} lambda_mu
  bool certified = false;  // closed-form asymptotics confirm the class
};

struct AttractivenessReport {
  std::vector<ModeReport> modes;
  bool attractive = false;  // every non-steady mode decays
  double horizon = 0.0;
  double threshold = 0.0;      // required accumulated decay g(T)
  double growth_delta = 0.0;   // required late growth g(T) - g(T/2)
  bool certified = false;      // all mode classes certified by closed forms
  std::string note;
};

// Checkpoint-growth test of accumulated decay. A mode is steady when all
// its eigenvalue coefficients on active terms vanish, decaying when
// g(T) >= threshold and g(T) - g(T/2) >= growth_delta, persistent otherwise
// (bounded integrals and purely oscillatory modes land here). Divergence as
// t -> infinity is certified only for rates with provably linear-plus-bounded
// integrals; otherwise the verdict is the heuristic at the given horizon.
AttractivenessReport attractiveness(const GeneratorModel& model, double horizon = 100.0,
                                    double threshold = 20.0, double growth_delta = 1.0,
                                    std::uint64_t seed = kDefaultSeed);

json damping_basis_to_json(const DampingBasis& basis);
json attractiveness_to_json(const AttractivenessReport& report);

}  // namespace qsteady
