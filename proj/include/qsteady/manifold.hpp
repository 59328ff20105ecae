#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qsteady/spectral.hpp"

namespace qsteady {

// ---------------------------------------------------------------------------
// Projections onto fixed-point sets
// ---------------------------------------------------------------------------

// A CPTP idempotent superoperator together with an HS-orthonormal basis of
// its fixed operator space (= its range). Construction validates both the
// idempotence and the CPTP certificate.
class SteadyProjector {
 public:
  explicit SteadyProjector(SuperOperator map, double idem_tol = 1e-9,
                           double cptp_tol = tol::kCptp);

  const SuperOperator& map() const { return map_; }
  Eigen::Index hilbert_dim() const { return map_.hilbert_dim; }
  const OperatorSubspace& fixed_space() const { return fixed_space_; }

  std::vector<std::string> warnings;
  std::vector<double> sample_times;               // set by steady_projector
  int distinct_projectors = 1;                    // set by steady_projector
  std::optional<double> finite_cesaro_distance;   // set by cesaro_projector

 private:
  SuperOperator map_;
  OperatorSubspace fixed_space_;
};

// HS-orthonormal basis of the kernel of (map - identity), i.e. of the fixed
// operator space of a CPTP map.
OperatorSubspace fixed_point_space(const SuperOperator& map, double tolerance = 1e-8);

// (1/N) sum_{n=1..N} map^n, computed by binary doubling of power sums.
SuperOperator finite_cesaro_mean(const SuperOperator& map, long n);

struct CesaroOptions {
  double cluster_tol = 1e-9;       // |eigenvalue - 1| grouping tolerance
  bool finite_check = true;        // compare against the finite mean
  long finite_n = 1024;
  double finite_threshold = 0.05;  // Frobenius distance; violation is a warning
};

// Limit of the Cesaro means of {map^n}: the spectral projection onto the
// eigenvalue-1 cluster, built from biorthonormalized right/left singular
// bases of (map - identity). Satisfies P map = map P = P^2 = P.
SteadyProjector cesaro_projector(const SuperOperator& map, const CesaroOptions& options = {});

struct SteadyOptions {
  std::vector<double> sample_times;  // empty: 16 geometric points on (0, 10]
  double grid_horizon = 10.0;
  double dedup_tol = 1e-8;           // Frobenius distance between projectors
  double verify_tol = 1e-8;
  int dense_verify_points = 64;
  std::uint64_t seed = kDefaultSeed;
};

// Projection onto the joint steady-state manifold: the product of the
// distinct Cesaro projectors over a time grid, verified against a denser
// grid (missed projectors trigger one automatic refinement).
SteadyProjector steady_projector(const GeneratorModel& model, const SteadyOptions& options = {});

// ---------------------------------------------------------------------------
// Reference state and block structure
// ---------------------------------------------------------------------------

struct ReferenceState {
  DensityOperator rho0;   // projector applied to the maximally mixed state
  Projector support;      // support projector of rho0; complement spans K
  int repair_rounds = 0;  // convex-combination augmentations performed
};

// Maximal-support steady state rho0 = P(I/d) with verified maximality: the
// image of every perturbation of I/d along the fixed space stays inside
// supp(rho0); failing witnesses are mixed in by convex combination.
ReferenceState reference_state(const SteadyProjector& p);

struct ManifoldBlock {
  ComplexMatrix isometry;  // d x (d1*d2), maps C^{d1} (x) C^{d2} into H
  Eigen::Index d1 = 0;     // noiseless factor dimension
  Eigen::Index d2 = 0;     // noisy factor dimension
  DensityOperator rho2;    // unique fixed state on the noisy factor
};

class ManifoldStructure {
 public:
  ManifoldStructure(std::vector<ManifoldBlock> blocks, Projector decaying,
                    DensityOperator reference);

  const std::vector<ManifoldBlock>& blocks() const { return blocks_; }
  const Projector& decaying_projector() const { return decaying_; }
  const DensityOperator& reference() const { return reference_; }
  Eigen::Index hilbert_dim() const { return decaying_.dim(); }
  Eigen::Index decaying_dim() const { return decaying_.rank(); }

  // sum_alpha d1^2: dimension of the steady operator space.
  Eigen::Index fixed_space_dim() const;

 private:
  std::vector<ManifoldBlock> blocks_;
  Projector decaying_;
  DensityOperator reference_;
};

// Decomposes the support of the steady manifold into orthogonal blocks
// H_{a,1} (x) H_{a,2}, the noiseless/noisy factorization underlying the
// projector's action P(rho) = sum_a Tr_2(Pa rho Pa) (x) rho_{a,2}. The
// randomized splitting retries with fresh draws until the reconstruction
// contract holds (at most `max_attempts`).
ManifoldStructure structure_decomposition(const SteadyProjector& p,
                                          std::uint64_t seed = kDefaultSeed,
                                          int max_attempts = 5);

// rho_ss = sum_a p_a V_a (rho_{a,1} (x) rho_{a,2}) V_a^dag.
DensityOperator assemble_steady_state(const ManifoldStructure& structure,
                                      const std::vector<double>& weights,
                                      const std::vector<DensityOperator>& noiseless_factors);

// P(rho), renormalized and validated as a density operator.
DensityOperator project_to_manifold(const SteadyProjector& p, const DensityOperator& rho);

json manifold_structure_to_json(const ManifoldStructure& structure);

}  // namespace qsteady
