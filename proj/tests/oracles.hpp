#pragma once

// Independent reference implementations used to check the library. These
// deliberately avoid the code paths under test: the matrix exponential is a
// scaled Taylor series (the library uses Pade through Eigen), the Cesaro
// mean is a literal power loop (the library doubles power sums).

#include <complex>

#include "qsteady/operators.hpp"

namespace oracle {

using qsteady::Complex;
using qsteady::ComplexMatrix;

// exp(M) by scaling and squaring with a plain Taylor series.
inline ComplexMatrix expm_taylor(const ComplexMatrix& m) {
  int squarings = 0;
  double norm = m.norm();
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const ComplexMatrix scaled = m / std::pow(2.0, squarings);
  ComplexMatrix result = ComplexMatrix::Identity(m.rows(), m.cols());
  ComplexMatrix term = result;
  for (int k = 1; k < 64; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.norm() < 1e-18 * result.norm()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

// (1/N) sum_{n=1..N} M^n by direct accumulation.
inline ComplexMatrix cesaro_loop(const ComplexMatrix& m, int n) {
  ComplexMatrix power = ComplexMatrix::Identity(m.rows(), m.cols());
  ComplexMatrix sum = ComplexMatrix::Zero(m.rows(), m.cols());
  for (int k = 1; k <= n; ++k) {
    power = power * m;
    sum += power;
  }
  return sum / static_cast<double>(n);
}

// Direct application of the Lindblad dissipator A rho A^dag - {A^dag A, rho}/2.
inline ComplexMatrix dissipate(const ComplexMatrix& a, const ComplexMatrix& rho) {
  const ComplexMatrix ada = a.adjoint() * a;
  return a * rho * a.adjoint() - 0.5 * (ada * rho + rho * ada);
}

// Direct -i[H, rho].
inline ComplexMatrix commute(const ComplexMatrix& h, const ComplexMatrix& rho) {
  return Complex(0.0, -1.0) * (h * rho - rho * h);
}

// Hand-built superoperator matrix of rho -> sum_k gamma_k D[A_k](rho) - i[H, rho],
// assembled entry by entry from its action on matrix units.
inline ComplexMatrix lindblad_matrix(const ComplexMatrix& h,
                                     const std::vector<ComplexMatrix>& jumps,
                                     const std::vector<double>& gammas) {
  const Eigen::Index d = h.rows();
  ComplexMatrix out(d * d, d * d);
  ComplexMatrix unit = ComplexMatrix::Zero(d, d);
  for (Eigen::Index col = 0; col < d; ++col)
    for (Eigen::Index row = 0; row < d; ++row) {
      unit(row, col) = 1.0;
      ComplexMatrix image = commute(h, unit);
      for (size_t k = 0; k < jumps.size(); ++k) image += gammas[k] * dissipate(jumps[k], unit);
      out.col(col * d + row) = qsteady::vectorize(image);
      unit(row, col) = 0.0;
    }
  return out;
}

}  // namespace oracle
