#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qsteady/errors.hpp"

namespace qsteady {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Default tolerances, overridable per call.
namespace tol {
inline constexpr double kHermiticity = 1e-10;
inline constexpr double kIdempotence = 1e-10;
inline constexpr double kPsdSlack = 1e-10;
inline constexpr double kRankCutoff = 1e-9;
inline constexpr double kCptp = 1e-8;
}  // namespace tol

// ---------------------------------------------------------------------------
// Vectorization (column stacking, fixed project-wide) and tensor algebra
// ---------------------------------------------------------------------------

// vec(X) stacks the columns of X; vec(A X B) = (B^T (x) A) vec(X).
ComplexVector vectorize(const ComplexMatrix& x);

// Inverse of vectorize for a d x d matrix. Round trip is exact.
ComplexMatrix devectorize(const ComplexVector& v, Eigen::Index d);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

// Trace over the factors of a tensor-product space not listed in `keep`.
// `dims` are the factor dimensions (first factor most significant, matching
// kron ordering); `keep` holds 0-based factor indices in increasing order.
// An empty `keep` yields the 1x1 matrix [Tr X].
ComplexMatrix partial_trace(const ComplexMatrix& x, const std::vector<Eigen::Index>& dims,
                            const std::vector<int>& keep);

// Hilbert-Schmidt inner product <X, Y> = Tr(X^dag Y), linear in Y.
Complex hs_inner(const ComplexMatrix& x, const ComplexMatrix& y);

// ---------------------------------------------------------------------------
// Core value types
// ---------------------------------------------------------------------------

// Hermitian, PSD, unit-trace operator on a d-dimensional Hilbert space.
// The constructor validates; pass wider tolerances to accept integrator slack.
class DensityOperator {
 public:
  explicit DensityOperator(ComplexMatrix rho, double herm_tol = tol::kHermiticity,
                           double trace_tol = tol::kHermiticity, double psd_slack = tol::kPsdSlack);

  const ComplexMatrix& matrix() const { return mat_; }
  Eigen::Index dim() const { return mat_.rows(); }

 private:
  ComplexMatrix mat_;
};

// A d^2 x d^2 matrix acting on vectorized d x d operators.
struct SuperOperator {
  ComplexMatrix mat;
  Eigen::Index hilbert_dim = 0;

  SuperOperator() = default;
  SuperOperator(ComplexMatrix m, Eigen::Index d);

  // S(X) through a vectorization round trip.
  ComplexMatrix apply(const ComplexMatrix& x) const;

  static SuperOperator identity(Eigen::Index d);
};

// Orthogonal projection on Hilbert space: P^2 = P = P^dag.
class Projector {
 public:
  explicit Projector(ComplexMatrix p, double tolerance = tol::kIdempotence);

  const ComplexMatrix& matrix() const { return mat_; }
  Eigen::Index dim() const { return mat_.rows(); }
  Eigen::Index rank() const { return rank_; }

 private:
  ComplexMatrix mat_;
  Eigen::Index rank_ = 0;
};

// A list of d x d matrices, pairwise orthonormal under hs_inner.
class OperatorSubspace {
 public:
  explicit OperatorSubspace(std::vector<ComplexMatrix> basis, double tolerance = tol::kHermiticity);

  const std::vector<ComplexMatrix>& basis() const { return basis_; }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(basis_.size()); }

 private:
  std::vector<ComplexMatrix> basis_;
};

// ---------------------------------------------------------------------------
// Superoperator calculus
// ---------------------------------------------------------------------------

// Adjoint with respect to hs_inner: <X, S(Y)> = <dual(S)(X), Y>.
SuperOperator dual_map(const SuperOperator& s);

// Choi matrix C = sum_ij |i><j| (x) S(|i><j|) on the doubled space.
ComplexMatrix choi_matrix(const SuperOperator& s);

struct CptpReport {
  bool ok = false;
  double choi_min_eigenvalue = 0.0;      // of the Hermitian part of the Choi matrix
  double choi_hermiticity_deviation = 0.0;
  double tp_deviation = 0.0;             // ||Tr_out(Choi) - I||_F
};

// Executable CPTP certificate: Choi PSD down to -tolerance and
// Tr_out(Choi) = identity within tolerance.
CptpReport is_cptp(const SuperOperator& s, double tolerance = tol::kCptp);

// Projector onto the span of eigenvectors of rho with eigenvalue > cutoff.
Projector support_projector(const DensityOperator& rho, double cutoff = tol::kRankCutoff);

// ---------------------------------------------------------------------------
// Small operator zoo used by models and tests
// ---------------------------------------------------------------------------

ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();
ComplexMatrix pauli_minus();  // |0><1|, lowers the excited state
ComplexMatrix basis_state(Eigen::Index d, Eigen::Index k);  // |k><k|

}  // namespace qsteady
