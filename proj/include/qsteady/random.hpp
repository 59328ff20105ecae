#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "qsteady/operators.hpp"

namespace qsteady {

inline constexpr std::uint64_t kDefaultSeed = 0x51ab5eed;

// Deterministic random source for the randomized linear-algebra steps.
// Gaussians come from Box-Muller over the raw 64-bit stream so a fixed seed
// reproduces the same draws independent of the standard library's
// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = kDefaultSeed) : engine_(seed) {}

  double uniform() {  // in [0, 1)
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  ComplexMatrix ginibre(Eigen::Index rows, Eigen::Index cols) {
    ComplexMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(gaussian(), gaussian());
    return m;
  }

  ComplexMatrix hermitian(Eigen::Index d) {
    const ComplexMatrix g = ginibre(d, d);
    return 0.5 * (g + g.adjoint());
  }

  // Full-rank random density operator G G^dag / Tr.
  DensityOperator density_operator(Eigen::Index d) {
    const ComplexMatrix g = ginibre(d, d);
    ComplexMatrix rho = g * g.adjoint();
    rho += 1e-8 * ComplexMatrix::Identity(d, d);
    rho /= rho.trace();
    return DensityOperator(0.5 * (rho + rho.adjoint()));
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qsteady
