#include "qsteady/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace qsteady {

namespace {

ComplexMatrix hermitize(const ComplexMatrix& x) { return 0.5 * (x + x.adjoint()); }

// Columns spanning the (near-)kernel: right singular vectors with
// sigma <= rel_tol * sigma_max. The absolute floor keeps near-zero input
// matrices (whole space is the kernel) from starving the threshold.
ComplexMatrix kernel_basis(const ComplexMatrix& a, double rel_tol) {
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double thresh = std::max(rel_tol * (sigma.size() ? sigma(0) : 0.0), 1e-12);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) <= thresh) ++r;
  return svd.matrixV().rightCols(r);
}

OperatorSubspace range_of_idempotent(const SuperOperator& p) {
  Eigen::JacobiSVD<ComplexMatrix> svd(p.mat, Eigen::ComputeFullU);
  const auto& sigma = svd.singularValues();
  std::vector<ComplexMatrix> basis;
  // Singular values of an idempotent are either 0 or >= 1.
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > 0.5) basis.push_back(devectorize(svd.matrixU().col(i), p.hilbert_dim));
  return OperatorSubspace(std::move(basis));
}

// Real-linear Gram-Schmidt over the Hermitian parts of a complex operator
// basis; a dagger-closed span of complex dimension n has exactly n
// independent Hermitian directions.
std::vector<ComplexMatrix> hermitian_span(const std::vector<ComplexMatrix>& basis,
                                          Eigen::Index expected_dim, const std::string& who) {
  const Complex half_i(0.0, -0.5);
  std::vector<ComplexMatrix> out;
  for (const auto& x : basis) {
    for (int part = 0; part < 2; ++part) {
      ComplexMatrix h = part == 0 ? ComplexMatrix(0.5 * (x + x.adjoint()))
                                  : ComplexMatrix(half_i * (x - x.adjoint()));
      for (const auto& g : out) h -= hs_inner(g, h).real() * g;
      const double norm = h.norm();
      if (norm > 1e-6) out.push_back(h / norm);
    }
  }
  if (static_cast<Eigen::Index>(out.size()) != expected_dim) {
    std::ostringstream msg;
    msg << who << ": Hermitian span has dimension " << out.size() << ", expected "
        << expected_dim << " (operator span is not dagger-closed)";
    throw VerificationError(msg.str());
  }
  return out;
}

// Ascending eigenvalue clusters with a spread-relative tolerance.
std::vector<std::vector<Eigen::Index>> cluster_real(const Eigen::VectorXd& values,
                                                    double rel_tol) {
  const double spread = values.size() ? values(values.size() - 1) - values(0) : 0.0;
  const double tolerance = rel_tol * (spread + 1.0);
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (groups.empty() || values(i) - values(groups.back().back()) > tolerance)
      groups.emplace_back();
    groups.back().push_back(i);
  }
  return groups;
}

}  // namespace

// ---------------------------------------------------------------------------

SteadyProjector::SteadyProjector(SuperOperator map, double idem_tol, double cptp_tol)
    : map_(std::move(map)), fixed_space_(range_of_idempotent(map_)) {
  const double scale = std::max(1.0, map_.mat.norm());
  const double idem = (map_.mat * map_.mat - map_.mat).norm();
  if (idem > idem_tol * scale) {
    std::ostringstream msg;
    msg << "SteadyProjector: map is not idempotent, ||P^2 - P|| = " << idem;
    throw VerificationError(msg.str());
  }
  const CptpReport cptp = is_cptp(map_, cptp_tol);
  if (!cptp.ok) {
    std::ostringstream msg;
    msg << "SteadyProjector: map is not CPTP (choi min eig " << cptp.choi_min_eigenvalue
        << ", tp deviation " << cptp.tp_deviation << ")";
    throw VerificationError(msg.str());
  }
}

OperatorSubspace fixed_point_space(const SuperOperator& map, double tolerance) {
  const CptpReport cptp = is_cptp(map);
  if (!cptp.ok) {
    std::ostringstream msg;
    msg << "fixed_point_space: map is not CPTP (choi min eig " << cptp.choi_min_eigenvalue
        << ", tp deviation " << cptp.tp_deviation << ")";
    throw InputError(msg.str());
  }
  const Eigen::Index n = map.mat.rows();
  const ComplexMatrix kernel =
      kernel_basis(map.mat - ComplexMatrix::Identity(n, n), tolerance);
  std::vector<ComplexMatrix> basis;
  for (Eigen::Index i = 0; i < kernel.cols(); ++i)
    basis.push_back(devectorize(kernel.col(i), map.hilbert_dim));
  return OperatorSubspace(std::move(basis));
}

SuperOperator finite_cesaro_mean(const SuperOperator& map, long n) {
  if (n < 1) throw InputError("finite_cesaro_mean: N must be positive");
  // (power, sum) for Lambda^n and sum_{k=1..n} Lambda^k by binary doubling.
  std::function<std::pair<ComplexMatrix, ComplexMatrix>(long)> power_sum =
      [&](long m) -> std::pair<ComplexMatrix, ComplexMatrix> {
    if (m == 1) return {map.mat, map.mat};
    if (m % 2 == 0) {
      auto [p, s] = power_sum(m / 2);
      return {p * p, s + p * s};
    }
    auto [p, s] = power_sum(m - 1);
    return {p * map.mat, s + p * map.mat};
  };
  auto [_, sum] = power_sum(n);
  return SuperOperator(sum / static_cast<double>(n), map.hilbert_dim);
}

SteadyProjector cesaro_projector(const SuperOperator& map, const CesaroOptions& options) {
  const CptpReport cptp = is_cptp(map);
  if (!cptp.ok) {
    std::ostringstream msg;
    msg << "cesaro_projector: input map is not CPTP (choi min eig " << cptp.choi_min_eigenvalue
        << ", tp deviation " << cptp.tp_deviation << ")";
    throw InputError(msg.str());
  }

  const Eigen::Index n = map.mat.rows();
  Eigen::ComplexEigenSolver<ComplexMatrix> es(map.mat, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw VerificationError("cesaro_projector: eigensolver failed to converge");

  Eigen::Index r = 0;
  double max_included = 0.0, nearest_excluded = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dist = std::abs(es.eigenvalues()(i) - Complex(1.0));
    if (dist <= options.cluster_tol) {
      ++r;
      max_included = std::max(max_included, dist);
    } else {
      nearest_excluded = std::min(nearest_excluded, dist);
    }
  }
  if (r == 0)
    throw InputError(
        "cesaro_projector: no eigenvalue within tolerance of 1; a CPTP map always has one, "
        "so the input is not a valid channel");

  // Right/left eigenvalue-1 spaces from the singular vectors of (map - I);
  // the peripheral eigenvalue of a CPTP map is semisimple, so the
  // biorthogonal pairing below is well conditioned.
  Eigen::JacobiSVD<ComplexMatrix> svd(map.mat - ComplexMatrix::Identity(n, n),
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
  const ComplexMatrix right = svd.matrixV().rightCols(r);
  const ComplexMatrix left = svd.matrixU().rightCols(r);
  const ComplexMatrix pairing = left.adjoint() * right;  // r x r
  Eigen::JacobiSVD<ComplexMatrix> pairing_svd(pairing);
  const auto& ps = pairing_svd.singularValues();
  if (ps(ps.size() - 1) < 1e-8 * std::max(1.0, ps(0)))
    throw VerificationError(
        "cesaro_projector: degenerate left/right pairing on the eigenvalue-1 cluster");
  ComplexMatrix projector = right * pairing.partialPivLu().solve(left.adjoint());

  const double scale = std::max(1.0, projector.norm());
  const double idem = (projector * projector - projector).norm();
  const double left_comm = (projector * map.mat - projector).norm();
  const double right_comm = (map.mat * projector - projector).norm();
  if (idem > 1e-9 * scale || left_comm > 1e-9 * scale || right_comm > 1e-9 * scale) {
    std::ostringstream msg;
    msg << "cesaro_projector: projector identities violated (P^2-P " << idem << ", PL-P "
        << left_comm << ", LP-P " << right_comm << ")";
    throw VerificationError(msg.str());
  }

  SteadyProjector out(SuperOperator(std::move(projector), map.hilbert_dim));
  if (nearest_excluded < 10.0 * options.cluster_tol) {
    std::ostringstream msg;
    msg << "eigenvalue cluster ambiguity: included eigenvalue at distance " << max_included
        << " from 1, nearest excluded at " << nearest_excluded;
    out.warnings.push_back(msg.str());
  }
  if (options.finite_check) {
    const double dist = (finite_cesaro_mean(map, options.finite_n).mat - out.map().mat).norm();
    out.finite_cesaro_distance = dist;
    if (dist > options.finite_threshold) {
      std::ostringstream msg;
      msg << "finite Cesaro mean at N=" << options.finite_n << " is " << dist
          << " from the spectral projector (threshold " << options.finite_threshold
          << "); the map mixes slowly at this time";
      out.warnings.push_back(msg.str());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> geometric_grid(double horizon, int points) {
  std::vector<double> grid;
  for (int i = 0; i < points; ++i)
    grid.push_back(horizon * std::pow(2.0, -(points - 1 - i)));
  return grid;
}

}  // namespace

SteadyProjector steady_projector(const GeneratorModel& model, const SteadyOptions& options) {
  require_commuting(model, "steady_projector");
  const Eigen::Index d = model.dim();
  const DampingBasis basis = damping_basis(model, options.seed);

  std::vector<double> grid = options.sample_times;
  if (grid.empty()) grid = geometric_grid(options.grid_horizon, 16);
  for (double t : grid)
    if (t <= 0.0) throw InputError("steady_projector: sample times must be positive");

  CesaroOptions cesaro_options;
  cesaro_options.finite_check = false;  // cross-checked at representative times by callers

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<ComplexMatrix> distinct;
    std::vector<std::string> warnings;
    for (double t : grid) {
      SteadyProjector pinf = cesaro_projector(propagator(model, basis, t), cesaro_options);
      for (const auto& w : pinf.warnings) warnings.push_back("t=" + std::to_string(t) + ": " + w);
      bool is_new = true;
      for (const auto& kept : distinct)
        if ((kept - pinf.map().mat).norm() <= options.dedup_tol) is_new = false;
      if (is_new) distinct.push_back(pinf.map().mat);
    }

    ComplexMatrix product = distinct.front();
    for (size_t i = 1; i < distinct.size(); ++i) product = product * distinct[i];

    // Verify against a denser grid; a violation means the sampling missed a
    // distinct projector.
    const double scale = std::max(1.0, product.norm());
    double worst = 0.0;
    const std::vector<double> dense =
        geometric_grid(options.grid_horizon, options.dense_verify_points);
    for (double t : dense) {
      const ComplexMatrix lam = propagator(model, basis, t).mat;
      worst = std::max(worst, (lam * product - product).norm());
      worst = std::max(worst, (product * lam - product).norm());
    }
    if ((product * product - product).norm() > options.verify_tol * scale ||
        worst > options.verify_tol * scale) {
      if (attempt == 0) {
        // Refine: rerun on the dense grid united with the original one.
        std::vector<double> refined = dense;
        refined.insert(refined.end(), grid.begin(), grid.end());
        std::sort(refined.begin(), refined.end());
        grid = refined;
        continue;
      }
      std::ostringstream msg;
      msg << "steady_projector: product projector fails verification on the dense grid "
             "(residual "
          << worst << "); the family {P_inf(t)} was not exhausted by sampling";
      throw VerificationError(msg.str());
    }

    SteadyProjector out(SuperOperator(std::move(product), d));
    out.warnings = std::move(warnings);
    out.sample_times = grid;
    out.distinct_projectors = static_cast<int>(distinct.size());
    return out;
  }
  throw VerificationError("steady_projector: unreachable");
}

// ---------------------------------------------------------------------------

ReferenceState reference_state(const SteadyProjector& p) {
  const Eigen::Index d = p.hilbert_dim();
  const ComplexMatrix mixed = ComplexMatrix::Identity(d, d) / static_cast<double>(d);

  auto project_to_state = [&](const ComplexMatrix& x) {
    ComplexMatrix y = hermitize(p.map().apply(x));
    y /= y.trace().real();
    return y;
  };

  ComplexMatrix rho0 = project_to_state(mixed);
  Projector support = support_projector(DensityOperator(rho0, 1e-8, 1e-8, 1e-8));

  // Maximality: perturb the mixed state along every Hermitian direction of
  // the fixed space; the projected image must stay inside supp(rho0).
  // Failing witnesses are folded in by convex combination.
  const double eps = 1.0 / (2.0 * static_cast<double>(d));
  const Complex minus_half_i(0.0, -0.5);
  int repairs = 0;
  const int max_rounds = 2 * static_cast<int>(p.fixed_space().dimension()) + 2;
  for (int round = 0; round < max_rounds; ++round) {
    bool repaired = false;
    for (const auto& e : p.fixed_space().basis()) {
      for (int part = 0; part < 2 && !repaired; ++part) {
        ComplexMatrix h = part == 0 ? ComplexMatrix(0.5 * (e + e.adjoint()))
                                    : ComplexMatrix(minus_half_i * (e - e.adjoint()));
        const double norm = h.norm();
        if (norm < 1e-10) continue;
        h /= norm;

        // Regularize I/d + eps*h to a genuine state before projecting.
        ComplexMatrix candidate = mixed + eps * h;
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(candidate);
        Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
        candidate = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
        candidate /= candidate.trace().real();

        const ComplexMatrix image = project_to_state(candidate);
        const double leakage = 1.0 - (support.matrix() * image).trace().real();
        if (leakage > 1e-8) {
          rho0 = hermitize(0.5 * rho0 + 0.5 * image);
          support = support_projector(DensityOperator(rho0, 1e-8, 1e-8, 1e-8));
          ++repairs;
          repaired = true;
        }
      }
      if (repaired) break;
    }
    if (!repaired)
      return ReferenceState{DensityOperator(rho0, 1e-8, 1e-8, 1e-8), std::move(support), repairs};
  }
  throw VerificationError(
      "reference_state: support maximality could not be repaired by convex combination");
}

// ---------------------------------------------------------------------------

ManifoldStructure::ManifoldStructure(std::vector<ManifoldBlock> blocks, Projector decaying,
                                     DensityOperator reference)
    : blocks_(std::move(blocks)), decaying_(std::move(decaying)), reference_(std::move(reference)) {
  const Eigen::Index d = decaying_.dim();
  Eigen::Index steady_dim = 0;
  for (size_t a = 0; a < blocks_.size(); ++a) {
    const auto& block = blocks_[a];
    if (block.d1 < 1 || block.d2 < 1 || block.isometry.rows() != d ||
        block.isometry.cols() != block.d1 * block.d2 || block.rho2.dim() != block.d2)
      throw VerificationError("ManifoldStructure: inconsistent block shapes");
    const ComplexMatrix gram = block.isometry.adjoint() * block.isometry;
    if ((gram - ComplexMatrix::Identity(gram.rows(), gram.cols())).norm() > 1e-9 * d)
      throw VerificationError("ManifoldStructure: block isometry is not isometric");
    for (size_t b = 0; b < a; ++b)
      if ((blocks_[b].isometry.adjoint() * block.isometry).norm() > 1e-9 * d)
        throw VerificationError("ManifoldStructure: block ranges are not orthogonal");
    steady_dim += block.d1 * block.d2;
  }
  if (steady_dim + decaying_.rank() != d)
    throw VerificationError("ManifoldStructure: block dimensions and decaying subspace do not "
                            "partition the Hilbert space");
}

Eigen::Index ManifoldStructure::fixed_space_dim() const {
  Eigen::Index out = 0;
  for (const auto& block : blocks_) out += block.d1 * block.d1;
  return out;
}

namespace {

struct RetryableFailure {
  std::string reason;
};

// One randomized attempt at the block decomposition of the steady support.
ManifoldStructure decompose_attempt(const SteadyProjector& p, const ReferenceState& ref,
                                    Rng& rng) {
  const Eigen::Index d = p.hilbert_dim();
  const Eigen::Index m = ref.support.rank();

  // Isometry onto the steady support H-tilde.
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> rho_eig(ref.rho0.matrix());
  ComplexMatrix embed(d, m);
  {
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      if (rho_eig.eigenvalues()(i) > tol::kRankCutoff) embed.col(c++) = rho_eig.eigenvectors().col(i);
    if (c != m) throw VerificationError("structure_decomposition: support rank mismatch");
  }

  // Invariance of H-tilde under the projector.
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix rho = embed * rng.density_operator(m).matrix() * embed.adjoint();
    const double leak = 1.0 - (ref.support.matrix() * p.map().apply(rho)).trace().real();
    if (leak > 1e-8)
      throw VerificationError(
          "structure_decomposition: steady support is not invariant under the projector");
  }

  // Compress the projector to H-tilde.
  ComplexMatrix ptilde(m * m, m * m);
  {
    ComplexMatrix unit = ComplexMatrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        unit(i, j) = 1.0;
        const ComplexMatrix image =
            embed.adjoint() * p.map().apply(embed * unit * embed.adjoint()) * embed;
        ptilde.col(j * m + i) = vectorize(image);
        unit(i, j) = 0.0;
      }
  }

  // Unitality of the compressed dual on H-tilde.
  const SuperOperator ptilde_map(ptilde, m);
  const ComplexMatrix identity_m = ComplexMatrix::Identity(m, m);
  if ((dual_map(ptilde_map).apply(identity_m) - identity_m).norm() > 1e-9 * m)
    throw VerificationError("structure_decomposition: compressed dual projector is not unital");

  // Fixed points of the unital dual form a dagger-closed algebra.
  const ComplexMatrix algebra_vecs =
      kernel_basis(ptilde.adjoint() - ComplexMatrix::Identity(m * m, m * m), 1e-8);
  const Eigen::Index algebra_dim = algebra_vecs.cols();
  if (algebra_dim == 0)
    throw VerificationError("structure_decomposition: dual fixed algebra is empty");
  std::vector<ComplexMatrix> algebra;
  for (Eigen::Index i = 0; i < algebra_dim; ++i)
    algebra.push_back(devectorize(algebra_vecs.col(i), m));
  const std::vector<ComplexMatrix> herm_algebra =
      hermitian_span(algebra, algebra_dim, "structure_decomposition");

  // Center: elements commuting with the whole algebra basis.
  ComplexMatrix commutator_map(algebra_dim * m * m, algebra_dim);
  for (Eigen::Index j = 0; j < algebra_dim; ++j)
    for (Eigen::Index k = 0; k < algebra_dim; ++k)
      commutator_map.block(k * m * m, j, m * m, 1) =
          vectorize(herm_algebra[j] * herm_algebra[k] - herm_algebra[k] * herm_algebra[j]);
  ComplexMatrix center_vecs;
  {
    Eigen::JacobiSVD<ComplexMatrix> svd(commutator_map, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double thresh = 1e-6 * std::max(1.0, sigma.size() ? sigma(0) : 0.0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
      if (sigma(i) <= thresh) ++r;
    center_vecs = svd.matrixV().rightCols(r);
  }
  const Eigen::Index n_blocks = center_vecs.cols();
  if (n_blocks == 0)
    throw VerificationError("structure_decomposition: algebra center is empty");
  std::vector<ComplexMatrix> center;
  for (Eigen::Index i = 0; i < n_blocks; ++i) {
    ComplexMatrix z = ComplexMatrix::Zero(m, m);
    for (Eigen::Index j = 0; j < algebra_dim; ++j) z += center_vecs(j, i) * herm_algebra[j];
    center.push_back(z);
  }
  const std::vector<ComplexMatrix> herm_center =
      hermitian_span(center, n_blocks, "structure_decomposition (center)");

  // Minimal central projections from the eigenvalue clusters of a random
  // Hermitian central element.
  ComplexMatrix central = ComplexMatrix::Zero(m, m);
  for (const auto& z : herm_center) central += rng.gaussian() * z;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> central_eig(central);
  const auto central_clusters = cluster_real(central_eig.eigenvalues(), 1e-6);
  if (static_cast<Eigen::Index>(central_clusters.size()) != n_blocks)
    throw RetryableFailure{"central element eigenvalues did not split into one cluster per "
                           "central dimension"};

  std::vector<ManifoldBlock> blocks;
  for (const auto& cluster : central_clusters) {
    const Eigen::Index block_dim = static_cast<Eigen::Index>(cluster.size());
    ComplexMatrix block_basis(m, block_dim);
    for (Eigen::Index i = 0; i < block_dim; ++i)
      block_basis.col(i) = central_eig.eigenvectors().col(cluster[i]);

    // Block algebra in block coordinates.
    std::vector<ComplexMatrix> compressed;
    ComplexMatrix stacked(block_dim * block_dim, algebra_dim);
    for (Eigen::Index j = 0; j < algebra_dim; ++j) {
      compressed.push_back(block_basis.adjoint() * herm_algebra[j] * block_basis);
      stacked.col(j) = vectorize(compressed.back());
    }
    Eigen::Index block_algebra_dim = 0;
    std::vector<ComplexMatrix> block_algebra;
    {
      Eigen::JacobiSVD<ComplexMatrix> svd(stacked, Eigen::ComputeFullU);
      const auto& sigma = svd.singularValues();
      const double thresh = 1e-6 * std::max(1.0, sigma.size() ? sigma(0) : 0.0);
      for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > thresh) ++block_algebra_dim;
      for (Eigen::Index i = 0; i < block_algebra_dim; ++i)
        block_algebra.push_back(devectorize(svd.matrixU().col(i), block_dim));
    }
    const Eigen::Index d1 = static_cast<Eigen::Index>(std::lround(std::sqrt(
        static_cast<double>(block_algebra_dim))));
    if (d1 * d1 != block_algebra_dim || block_dim % d1 != 0)
      throw RetryableFailure{"block algebra dimension is not a perfect square times a "
                             "divisor of the block"};
    const Eigen::Index d2 = block_dim / d1;

    const std::vector<ComplexMatrix> herm_block =
        hermitian_span(block_algebra, block_algebra_dim, "structure_decomposition (block)");

    // Tensor factorization: eigenspaces of a random Hermitian block-algebra
    // element give the noiseless index, a second element aligns the noisy
    // bases across eigenspaces.
    ComplexMatrix probe = ComplexMatrix::Zero(block_dim, block_dim);
    for (const auto& h : herm_block) probe += rng.gaussian() * h;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> probe_eig(probe);
    const auto probe_clusters = cluster_real(probe_eig.eigenvalues(), 1e-6);
    if (static_cast<Eigen::Index>(probe_clusters.size()) != d1)
      throw RetryableFailure{"block probe did not split into d1 eigenspaces"};
    for (const auto& sub : probe_clusters)
      if (static_cast<Eigen::Index>(sub.size()) != d2)
        throw RetryableFailure{"block probe eigenspaces have unequal dimensions"};

    std::vector<ComplexMatrix> eigenspaces;
    for (const auto& sub : probe_clusters) {
      ComplexMatrix s(block_dim, d2);
      for (Eigen::Index i = 0; i < d2; ++i) s.col(i) = probe_eig.eigenvectors().col(sub[i]);
      eigenspaces.push_back(std::move(s));
    }
    if (d1 > 1) {
      ComplexMatrix connector = ComplexMatrix::Zero(block_dim, block_dim);
      for (const auto& h : herm_block) connector += rng.gaussian() * h;
      for (Eigen::Index i = 1; i < d1; ++i) {
        const ComplexMatrix link = eigenspaces[i].adjoint() * connector * eigenspaces[0];
        Eigen::JacobiSVD<ComplexMatrix> svd(link, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto& sigma = svd.singularValues();
        if (sigma(sigma.size() - 1) < 1e-6 * std::max(1.0, sigma(0)))
          throw RetryableFailure{"degenerate connector between block eigenspaces"};
        eigenspaces[i] = eigenspaces[i] * (svd.matrixU() * svd.matrixV().adjoint());
      }
    }

    ComplexMatrix isometry(d, d1 * d2);
    for (Eigen::Index i = 0; i < d1; ++i)
      for (Eigen::Index j = 0; j < d2; ++j)
        isometry.col(i * d2 + j) = embed * (block_basis * eigenspaces[i].col(j));

    // Unique fixed state on the noisy factor, read off the reference state.
    const ComplexMatrix block_rho = isometry.adjoint() * ref.rho0.matrix() * isometry;
    ComplexMatrix rho2 = partial_trace(block_rho, {d1, d2}, {1});
    const double weight = rho2.trace().real();
    if (weight < 1e-12)
      throw VerificationError("structure_decomposition: block carries no reference weight");
    rho2 = hermitize(rho2 / weight);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> rho2_eig(rho2);
    if (rho2_eig.eigenvalues().minCoeff() < 1e-10)
      throw RetryableFailure{"noisy-factor state is rank deficient"};
    blocks.push_back(
        ManifoldBlock{std::move(isometry), d1, d2, DensityOperator(rho2, 1e-8, 1e-8, 1e-8)});
  }

  // Canonical block order: largest subspaces first, then largest noiseless
  // factor, then lowest support row.
  auto first_row = [&](const ManifoldBlock& block) {
    for (Eigen::Index r = 0; r < d; ++r)
      if (block.isometry.row(r).norm() > 1e-6) return r;
    return d;
  };
  std::sort(blocks.begin(), blocks.end(), [&](const ManifoldBlock& a, const ManifoldBlock& b) {
    if (a.d1 * a.d2 != b.d1 * b.d2) return a.d1 * a.d2 > b.d1 * b.d2;
    if (a.d1 != b.d1) return a.d1 > b.d1;
    return first_row(a) < first_row(b);
  });

  const ComplexMatrix complement =
      ComplexMatrix::Identity(d, d) - ref.support.matrix();
  ManifoldStructure structure(std::move(blocks), Projector(hermitize(complement)), ref.rho0);

  // Reconstruction contract: the projector acts as
  // rho -> sum_a V_a (Tr_2(V_a^dag P_a rho P_a V_a) (x) rho2_a) V_a^dag
  // on states supported in H-tilde.
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix rho = embed * rng.density_operator(m).matrix() * embed.adjoint();
    const ComplexMatrix projected = p.map().apply(rho);
    ComplexMatrix rebuilt = ComplexMatrix::Zero(d, d);
    for (const auto& block : structure.blocks()) {
      const ComplexMatrix pa = block.isometry * block.isometry.adjoint();
      const ComplexMatrix inside = block.isometry.adjoint() * (pa * rho * pa) * block.isometry;
      rebuilt += block.isometry *
                 kron(partial_trace(inside, {block.d1, block.d2}, {0}), block.rho2.matrix()) *
                 block.isometry.adjoint();
    }
    if ((projected - rebuilt).norm() > 1e-8)
      throw RetryableFailure{"reconstruction residual " +
                             std::to_string((projected - rebuilt).norm())};
  }
  return structure;
}

}  // namespace

ManifoldStructure structure_decomposition(const SteadyProjector& p, std::uint64_t seed,
                                          int max_attempts) {
  const ReferenceState ref = reference_state(p);
  Rng rng(seed);
  std::string last_reason;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    try {
      return decompose_attempt(p, ref, rng);
    } catch (const RetryableFailure& failure) {
      last_reason = failure.reason;
    }
  }
  throw VerificationError("structure_decomposition: failed after " +
                          std::to_string(max_attempts) + " randomized attempts (last: " +
                          last_reason + ")");
}

// ---------------------------------------------------------------------------

DensityOperator assemble_steady_state(const ManifoldStructure& structure,
                                      const std::vector<double>& weights,
                                      const std::vector<DensityOperator>& noiseless_factors) {
  const auto& blocks = structure.blocks();
  if (weights.size() != blocks.size() || noiseless_factors.size() != blocks.size())
    throw InputError("assemble_steady_state: need one weight and one noiseless factor per block");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InputError("assemble_steady_state: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InputError("assemble_steady_state: weights must sum to 1");

  const Eigen::Index d = structure.hilbert_dim();
  ComplexMatrix rho = ComplexMatrix::Zero(d, d);
  for (size_t a = 0; a < blocks.size(); ++a) {
    if (noiseless_factors[a].dim() != blocks[a].d1) {
      std::ostringstream msg;
      msg << "assemble_steady_state: factor " << a << " has dimension "
          << noiseless_factors[a].dim() << ", block expects " << blocks[a].d1;
      throw InputError(msg.str());
    }
    rho += weights[a] * blocks[a].isometry *
           kron(noiseless_factors[a].matrix(), blocks[a].rho2.matrix()) *
           blocks[a].isometry.adjoint();
  }
  return DensityOperator(hermitize(rho));
}

DensityOperator project_to_manifold(const SteadyProjector& p, const DensityOperator& rho) {
  ComplexMatrix out = hermitize(p.map().apply(rho.matrix()));
  out /= out.trace().real();
  return DensityOperator(out, 1e-8, 1e-8, 1e-8);
}

// ---------------------------------------------------------------------------

json manifold_structure_to_json(const ManifoldStructure& structure) {
  json blocks = json::array();
  for (const auto& block : structure.blocks())
    blocks.push_back(json{{"d1", block.d1},
                          {"d2", block.d2},
                          {"isometry", matrix_to_json(block.isometry)},
                          {"rho2", matrix_to_json(block.rho2.matrix())}});
  return json{{"blocks", blocks},
              {"decaying_dim", structure.decaying_dim()},
              {"reference_state", matrix_to_json(structure.reference().matrix())}};
}

}  // namespace qsteady
