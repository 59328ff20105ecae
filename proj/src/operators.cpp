#include "qsteady/operators.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace qsteady {

ComplexVector vectorize(const ComplexMatrix& x) {
  // Eigen stores column-major, so the flat view already is the column stack.
  return Eigen::Map<const ComplexVector>(x.data(), x.size());
}

ComplexMatrix devectorize(const ComplexVector& v, Eigen::Index d) {
  if (v.size() != d * d) {
    std::ostringstream msg;
    msg << "devectorize: vector of length " << v.size() << " does not fit a " << d << "x" << d
        << " matrix";
    throw InputError(msg.str());
  }
  return Eigen::Map<const ComplexMatrix>(v.data(), d, d);
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

ComplexMatrix partial_trace(const ComplexMatrix& x, const std::vector<Eigen::Index>& dims,
                            const std::vector<int>& keep) {
  Eigen::Index total = 1;
  for (Eigen::Index d : dims) {
    if (d < 1) throw InputError("partial_trace: factor dimensions must be positive");
    total *= d;
  }
  if (x.rows() != total || x.cols() != total) {
    std::ostringstream msg;
    msg << "partial_trace: dims product " << total << " does not match matrix dimension "
        << x.rows() << "x" << x.cols();
    throw InputError(msg.str());
  }
  const int n = static_cast<int>(dims.size());
  std::vector<bool> kept(n, false);
  for (int k : keep) {
    if (k < 0 || k >= n) throw InputError("partial_trace: keep index out of range");
    kept[k] = true;
  }

  Eigen::Index kept_dim = 1, traced_dim = 1;
  for (int f = 0; f < n; ++f) (kept[f] ? kept_dim : traced_dim) *= dims[f];

  // Strides of each factor in the flat index (first factor most significant).
  std::vector<Eigen::Index> stride(n, 1);
  for (int f = n - 2; f >= 0; --f) stride[f] = stride[f + 1] * dims[f + 1];

  // Row-major strides within the kept-factor and traced-factor index spaces.
  std::vector<Eigen::Index> kept_stride, traced_stride;
  std::vector<int> kept_f, traced_f;
  {
    Eigen::Index ks = kept_dim, ts = traced_dim;
    for (int f = 0; f < n; ++f) {
      if (kept[f]) {
        ks /= dims[f];
        kept_stride.push_back(ks);
        kept_f.push_back(f);
      } else {
        ts /= dims[f];
        traced_stride.push_back(ts);
        traced_f.push_back(f);
      }
    }
  }

  auto flat = [&](Eigen::Index kept_idx, Eigen::Index traced_idx) {
    Eigen::Index out = 0;
    for (size_t i = 0; i < kept_f.size(); ++i)
      out += ((kept_idx / kept_stride[i]) % dims[kept_f[i]]) * stride[kept_f[i]];
    for (size_t i = 0; i < traced_f.size(); ++i)
      out += ((traced_idx / traced_stride[i]) % dims[traced_f[i]]) * stride[traced_f[i]];
    return out;
  };

  ComplexMatrix out = ComplexMatrix::Zero(kept_dim, kept_dim);
  for (Eigen::Index r = 0; r < kept_dim; ++r)
    for (Eigen::Index c = 0; c < kept_dim; ++c)
      for (Eigen::Index t = 0; t < traced_dim; ++t) out(r, c) += x(flat(r, t), flat(c, t));
  return out;
}

Complex hs_inner(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw InputError("hs_inner: dimension mismatch");
  return (x.adjoint() * y).trace();
}

// ---------------------------------------------------------------------------

DensityOperator::DensityOperator(ComplexMatrix rho, double herm_tol, double trace_tol,
                                 double psd_slack)
    : mat_(std::move(rho)) {
  if (mat_.rows() != mat_.cols() || mat_.rows() < 1)
    throw InputError("DensityOperator: matrix must be square and nonempty");
  const double scale = std::max(1.0, mat_.norm());
  const double herm = (mat_ - mat_.adjoint()).norm();
  if (herm > herm_tol * scale) {
    std::ostringstream msg;
    msg << "DensityOperator: not Hermitian, ||rho - rho^dag|| = " << herm;
    throw InputError(msg.str());
  }
  const double trace_dev = std::abs(mat_.trace() - Complex(1.0));
  if (trace_dev > trace_tol) {
    std::ostringstream msg;
    msg << "DensityOperator: trace deviates from 1 by " << trace_dev;
    throw InputError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (mat_ + mat_.adjoint()),
                                                  Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -psd_slack) {
    std::ostringstream msg;
    msg << "DensityOperator: not positive semi-definite, min eigenvalue = " << min_eig;
    throw InputError(msg.str());
  }
}

SuperOperator::SuperOperator(ComplexMatrix m, Eigen::Index d) : mat(std::move(m)), hilbert_dim(d) {
  if (mat.rows() != d * d || mat.cols() != d * d)
    throw InputError("SuperOperator: matrix must be d^2 x d^2");
}

ComplexMatrix SuperOperator::apply(const ComplexMatrix& x) const {
  if (x.rows() != hilbert_dim || x.cols() != hilbert_dim)
    throw InputError("SuperOperator::apply: operand dimension mismatch");
  return devectorize(mat * vectorize(x), hilbert_dim);
}

SuperOperator SuperOperator::identity(Eigen::Index d) {
  return SuperOperator(ComplexMatrix::Identity(d * d, d * d), d);
}

Projector::Projector(ComplexMatrix p, double tolerance) : mat_(std::move(p)) {
  if (mat_.rows() != mat_.cols()) throw InputError("Projector: matrix must be square");
  const double scale = std::max(1.0, mat_.norm());
  const double herm = (mat_ - mat_.adjoint()).norm();
  const double idem = (mat_ * mat_ - mat_).norm();
  if (herm > tolerance * scale || idem > tolerance * scale) {
    std::ostringstream msg;
    msg << "Projector: violates P=P^dag (" << herm << ") or P^2=P (" << idem << ")";
    throw InputError(msg.str());
  }
  rank_ = static_cast<Eigen::Index>(std::lround(mat_.trace().real()));
}

OperatorSubspace::OperatorSubspace(std::vector<ComplexMatrix> basis, double tolerance)
    : basis_(std::move(basis)) {
  for (size_t i = 0; i < basis_.size(); ++i) {
    for (size_t j = i; j < basis_.size(); ++j) {
      const Complex g = hs_inner(basis_[i], basis_[j]);
      const double expected = (i == j) ? 1.0 : 0.0;
      if (std::abs(g - expected) > tolerance) {
        std::ostringstream msg;
        msg << "OperatorSubspace: basis not HS-orthonormal at pair (" << i << "," << j
            << "), <Bi,Bj> = " << g;
        throw InputError(msg.str());
      }
    }
  }
}

// ---------------------------------------------------------------------------

SuperOperator dual_map(const SuperOperator& s) {
  // <X, S(Y)> = vec(X)^dag M vec(Y), so the dual is the adjoint matrix.
  return SuperOperator(s.mat.adjoint(), s.hilbert_dim);
}

ComplexMatrix choi_matrix(const SuperOperator& s) {
  const Eigen::Index d = s.hilbert_dim;
  ComplexMatrix choi = ComplexMatrix::Zero(d * d, d * d);
  ComplexMatrix unit = ComplexMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      unit(i, j) = 1.0;
      choi.block(i * d, j * d, d, d) = s.apply(unit);  // |i><j| (x) S(|i><j|)
      unit(i, j) = 0.0;
    }
  }
  return choi;
}

CptpReport is_cptp(const SuperOperator& s, double tolerance) {
  const Eigen::Index d = s.hilbert_dim;
  const ComplexMatrix choi = choi_matrix(s);

  CptpReport report;
  report.choi_hermiticity_deviation = (choi - choi.adjoint()).norm();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (choi + choi.adjoint()),
                                                  Eigen::EigenvaluesOnly);
  report.choi_min_eigenvalue = es.eigenvalues().minCoeff();
  report.tp_deviation =
      (partial_trace(choi, {d, d}, {0}) - ComplexMatrix::Identity(d, d)).norm();

  const double herm_scale = std::max(1.0, choi.norm());
  report.ok = report.choi_min_eigenvalue >= -tolerance && report.tp_deviation <= tolerance &&
              report.choi_hermiticity_deviation <= tolerance * herm_scale;
  return report;
}

Projector support_projector(const DensityOperator& rho, double cutoff) {
  const ComplexMatrix& m = rho.matrix();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint()));
  ComplexMatrix p = ComplexMatrix::Zero(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    if (es.eigenvalues()(k) > cutoff)
      p += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
  }
  return Projector(std::move(p));
}

// ---------------------------------------------------------------------------

ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

ComplexMatrix pauli_minus() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}

ComplexMatrix basis_state(Eigen::Index d, Eigen::Index k) {
  if (k < 0 || k >= d) throw InputError("basis_state: index out of range");
  ComplexMatrix m = ComplexMatrix::Zero(d, d);
  m(k, k) = 1.0;
  return m;
}

}  // namespace qsteady
