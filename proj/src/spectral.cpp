#include "qsteady/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <unsupported/Eigen/MatrixFunctions>

namespace qsteady {

namespace {

// Relative tolerance for grouping eigenvalues into degenerate clusters.
constexpr double kClusterTol = 1e-8;
// Eigenvector-matrix condition number beyond which the family is treated
// as defective.
constexpr double kDiagConditionLimit = 1e8;

double condition_number_of(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

// Union-find clustering of complex values within an absolute tolerance.
// Groups are emitted in order of their smallest member index.
std::vector<std::vector<Eigen::Index>> cluster_values(const ComplexVector& values,
                                                      double tolerance) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> parent(n);
  std::iota(parent.begin(), parent.end(), Eigen::Index(0));
  std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(values(i) - values(j)) <= tolerance) parent[find(i)] = find(j);

  std::vector<std::vector<Eigen::Index>> groups;
  std::vector<Eigen::Index> root_to_group(n, -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = find(i);
    if (root_to_group[r] < 0) {
      root_to_group[r] = static_cast<Eigen::Index>(groups.size());
      groups.emplace_back();
    }
    groups[root_to_group[r]].push_back(i);
  }
  return groups;
}

double max_offdiagonal(const ComplexMatrix& m) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) out = std::max(out, std::abs(m(i, j)));
  return out;
}

// Refines the eigenvector columns listed in `cols` (a joint invariant
// subspace on which pieces 0..k-1 already act as scalars) so that piece k
// and onward become diagonal. Returns false when a defective restriction
// is encountered.
bool refine_cluster(std::vector<ComplexMatrix>& pieces, size_t k, ComplexMatrix& V,
                    ComplexMatrix& W, const std::vector<Eigen::Index>& cols, double scale) {
  if (k == pieces.size() || cols.size() == 1) return true;

  const Eigen::Index m = static_cast<Eigen::Index>(cols.size());
  ComplexMatrix vc(V.rows(), m), wc(m, V.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    vc.col(i) = V.col(cols[i]);
    wc.row(i) = W.row(cols[i]);
  }
  const ComplexMatrix restricted = wc * pieces[k] * vc;

  if (max_offdiagonal(restricted) > kClusterTol * scale) {
    Eigen::ComplexEigenSolver<ComplexMatrix> es(restricted);
    if (es.info() != Eigen::Success) return false;
    const ComplexMatrix& t = es.eigenvectors();
    if (condition_number_of(t) > kDiagConditionLimit) return false;
    const ComplexMatrix vc_new = vc * t;
    const ComplexMatrix wc_new = t.partialPivLu().solve(wc);
    for (Eigen::Index i = 0; i < m; ++i) {
      V.col(cols[i]) = vc_new.col(i);
      W.row(cols[i]) = wc_new.row(i);
    }
    for (const auto& sub : cluster_values(es.eigenvalues(), kClusterTol * scale)) {
      std::vector<Eigen::Index> sub_cols;
      for (Eigen::Index i : sub) sub_cols.push_back(cols[i]);
      if (!refine_cluster(pieces, k + 1, V, W, sub_cols, scale)) return false;
    }
    return true;
  }
  return refine_cluster(pieces, k + 1, V, W, cols, scale);
}

}  // namespace

Complex DampingBasis::eigenvalue_at(const GeneratorModel& model, size_t mu, double t) const {
  if (mu >= modes.size()) throw InputError("DampingBasis::eigenvalue_at: mode index out of range");
  Complex out(0.0, 0.0);
  for (Eigen::Index k = 0; k < modes[mu].coeffs.size(); ++k)
    out += model.terms()[k].rate.eval(t) * modes[mu].coeffs(k);
  return out;
}

DampingBasis damping_basis(const GeneratorModel& model, std::uint64_t seed) {
  require_commuting(model, "damping_basis");
  const Eigen::Index n = model.dim() * model.dim();
  const size_t n_terms = model.terms().size();

  DampingBasis basis;
  std::vector<ComplexMatrix> pieces;
  double scale = 0.0;
  for (const auto& term : model.terms()) {
    pieces.push_back(term.piece.mat);
    scale = std::max(scale, term.piece.mat.norm());
  }
  scale = std::max(scale, 1.0);

  ComplexMatrix V, W;
  if (n_terms == 0) {
    V = ComplexMatrix::Identity(n, n);
    W = V;
  } else {
    // Diagonalize a random real combination; a generic combination separates
    // all joint eigenspaces, and the cluster refinement repairs collisions.
    Rng rng(seed);
    ComplexMatrix mix = ComplexMatrix::Zero(n, n);
    for (const auto& p : pieces) mix += rng.gaussian() * p;

    Eigen::ComplexEigenSolver<ComplexMatrix> es(mix, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
      throw VerificationError("damping_basis: eigensolver failed to converge");

    // Eigenspaces cluster by cluster from SVD kernels of (mix - lambda I);
    // this stays well conditioned where the plain eigenvector matrix of a
    // non-normal operator with repeated eigenvalues does not. A cluster
    // whose kernel is thinner than its multiplicity is defective.
    const double mix_scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    const auto groups = cluster_values(es.eigenvalues(), kClusterTol * mix_scale);
    V.resize(n, n);
    for (const auto& group : groups) {
      Complex center(0.0, 0.0);
      for (Eigen::Index i : group) center += es.eigenvalues()(i);
      center /= static_cast<double>(group.size());

      Eigen::JacobiSVD<ComplexMatrix> svd(
          mix - center * ComplexMatrix::Identity(n, n), Eigen::ComputeFullV);
      const Eigen::Index m = static_cast<Eigen::Index>(group.size());
      if (svd.singularValues()(n - m) > 1e-7 * mix_scale) {
        basis.diagonalizable = false;
        return basis;
      }
      for (Eigen::Index i = 0; i < m; ++i) V.col(group[i]) = svd.matrixV().col(n - m + i);
    }
    basis.condition_number = condition_number_of(V);
    if (basis.condition_number > kDiagConditionLimit) {
      basis.diagonalizable = false;
      return basis;
    }
    W = V.partialPivLu().solve(ComplexMatrix::Identity(n, n));

    for (const auto& group : groups) {
      if (!refine_cluster(pieces, 0, V, W, group, scale)) {
        basis.diagonalizable = false;
        return basis;
      }
    }
    // Biorthonormalize blockwise through the inverse of the refined basis.
    W = V.partialPivLu().solve(ComplexMatrix::Identity(n, n));
    basis.condition_number = condition_number_of(V);
  }

  // Read per-piece eigenvalues off the diagonal and verify diagonality.
  std::vector<ComplexMatrix> diag(n_terms);
  for (size_t k = 0; k < n_terms; ++k) {
    diag[k] = W * pieces[k] * V;
    if (max_offdiagonal(diag[k]) > 1e-7 * scale) {
      basis.diagonalizable = false;
      basis.modes.clear();
      return basis;
    }
  }

  basis.modes.resize(n);
  for (Eigen::Index mu = 0; mu < n; ++mu) {
    DampingMode& mode = basis.modes[mu];
    mode.coeffs.resize(n_terms);
    for (size_t k = 0; k < n_terms; ++k) mode.coeffs(k) = diag[k](mu, mu);
    mode.right = devectorize(V.col(mu), model.dim());
    mode.left = devectorize(W.row(mu).adjoint(), model.dim());
  }
  return basis;
}

// ---------------------------------------------------------------------------

SuperOperator propagator(const GeneratorModel& model, const DampingBasis& basis, double t) {
  if (t < 0.0) throw InputError("propagator: time must be nonnegative");
  if (!basis.diagonalizable) return propagator_expm(model, t);

  const Eigen::Index n = model.dim() * model.dim();
  ComplexMatrix v(n, n), w(n, n);
  ComplexVector exponents = ComplexVector::Zero(n);
  ComplexVector integrals(model.terms().size());
  for (size_t k = 0; k < model.terms().size(); ++k)
    integrals(k) = model.terms()[k].rate.integral(t);
  for (Eigen::Index mu = 0; mu < n; ++mu) {
    const DampingMode& mode = basis.modes[mu];
    v.col(mu) = vectorize(mode.right);
    w.row(mu) = vectorize(mode.left).adjoint();
    for (Eigen::Index k = 0; k < mode.coeffs.size(); ++k)
      exponents(mu) += integrals(k) * mode.coeffs(k);
  }
  return SuperOperator(v * exponents.array().exp().matrix().asDiagonal() * w, model.dim());
}

SuperOperator propagator(const GeneratorModel& model, double t) {
  return propagator(model, damping_basis(model), t);
}

SuperOperator propagator_expm(const GeneratorModel& model, double t) {
  if (t < 0.0) throw InputError("propagator_expm: time must be nonnegative");
  require_commuting(model, "propagator_expm");
  return SuperOperator(model.integrated_generator(t).mat.exp(), model.dim());
}

// ---------------------------------------------------------------------------

double mode_rate_integral(const GeneratorModel& model, const DampingBasis& basis, size_t mu,
                          double horizon) {
  if (mu >= basis.modes.size())
    throw InputError("mode_rate_integral: mode index out of range");
  Complex acc(0.0, 0.0);
  for (Eigen::Index k = 0; k < basis.modes[mu].coeffs.size(); ++k)
    acc += model.terms()[k].rate.integral(horizon) * basis.modes[mu].coeffs(k);
  return acc.real();
}

const char* to_string(ModeClass c) {
  switch (c) {
    case ModeClass::Steady: return "steady";
    case ModeClass::Decaying: return "decaying";
    case ModeClass::Persistent: return "persistent";
  }
  return "?";
}

AttractivenessReport attractiveness(const GeneratorModel& model, double horizon,
                                    double threshold, double growth_delta, std::uint64_t seed) {
  if (horizon <= 0.0) throw InputError("attractiveness: horizon must be positive");
  const DampingBasis basis = damping_basis(model, seed);
  if (!basis.diagonalizable)
    throw VerificationError(
        "attractiveness: generator family is not diagonalizable, no damping basis available");

  AttractivenessReport report;
  report.horizon = horizon;
  report.threshold = threshold;
  report.growth_delta = growth_delta;

  const size_t n_terms = model.terms().size();
  double spectral_scale = 1.0;
  for (const auto& mode : basis.modes)
    if (mode.coeffs.size() > 0)
      spectral_scale = std::max(spectral_scale, mode.coeffs.cwiseAbs().maxCoeff());
  const double steady_tol = 1e-10 * spectral_scale;

  const std::vector<double> checkpoints{horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon};
  std::vector<std::vector<double>> term_integrals(n_terms);
  std::vector<std::optional<double>> growth(n_terms);
  bool growth_known = true;
  for (size_t k = 0; k < n_terms; ++k) {
    for (double tc : checkpoints) term_integrals[k].push_back(model.terms()[k].rate.integral(tc));
    growth[k] = model.terms()[k].rate.linear_growth();
    growth_known = growth_known && growth[k].has_value();
  }

  bool all_certified = growth_known;
  report.modes.reserve(basis.modes.size());
  for (const auto& mode : basis.modes) {
    ModeReport mr;
    mr.coeffs = mode.coeffs;
    mr.checkpoint_times = checkpoints;

    bool steady = true;
    for (size_t k = 0; k < n_terms; ++k)
      if (!model.terms()[k].rate.is_zero() && std::abs(mode.coeffs(k)) > steady_tol)
        steady = false;

    for (size_t c = 0; c < checkpoints.size(); ++c) {
      double g = 0.0;
      for (size_t k = 0; k < n_terms; ++k)
        g -= term_integrals[k][c] * mode.coeffs(k).real();
      mr.checkpoint_decay.push_back(g);
    }
    const double g_full = mr.checkpoint_decay[3], g_half = mr.checkpoint_decay[2];

    if (steady)
      mr.classification = ModeClass::Steady;
    else if (g_full >= threshold && g_full - g_half >= growth_delta)
      mr.classification = ModeClass::Decaying;
    else
      mr.classification = ModeClass::Persistent;

    if (growth_known) {
      // Certified slope of -Re int lambda: positive slope means provable
      // divergence, zero slope plus bounded remainder means provable
      // boundedness.
      double slope = 0.0;
      for (size_t k = 0; k < n_terms; ++k) slope -= *growth[k] * mode.coeffs(k).real();
      const double slope_tol = 1e-10 * spectral_scale;
      if (steady)
        mr.certified = true;
      else if (slope > slope_tol)
        mr.certified = mr.classification == ModeClass::Decaying;
      else
        mr.certified = mr.classification == ModeClass::Persistent;
      all_certified = all_certified && mr.certified;
    }
    report.modes.push_back(std::move(mr));
  }

  report.attractive = true;
  for (const auto& mr : report.modes)
    if (mr.classification != ModeClass::Steady)
      report.attractive = report.attractive && mr.classification == ModeClass::Decaying;

  report.certified = all_certified;
  if (!growth_known)
    report.note =
        "heuristic verdict: some rates carry no closed-form integral with known asymptotics; "
        "divergence as t -> infinity is inferred from checkpoint growth only";
  else if (all_certified)
    report.note = "verdict certified by closed-form rate integrals with linear-plus-bounded growth";
  else
    report.note =
        "closed-form asymptotics disagree with the checkpoint classification for at least one "
        "mode; the checkpoint heuristic at the given horizon is reported";
  return report;
}

// ---------------------------------------------------------------------------

namespace {

json complex_to_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

json coeffs_to_json(const ComplexVector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(complex_to_json(v(k)));
  return out;
}

}  // namespace

json damping_basis_to_json(const DampingBasis& basis) {
  json modes = json::array();
  for (const auto& mode : basis.modes)
    modes.push_back(json{{"eigenvalue_coeffs", coeffs_to_json(mode.coeffs)}});
  return json{{"diagonalizable", basis.diagonalizable},
              {"condition_number", basis.condition_number},
              {"modes", modes}};
}

json attractiveness_to_json(const AttractivenessReport& report) {
  json modes = json::array();
  for (const auto& mode : report.modes) {
    json checkpoints = json::array();
    for (size_t c = 0; c < mode.checkpoint_times.size(); ++c)
      checkpoints.push_back(
          json{{"t", mode.checkpoint_times[c]}, {"decay", mode.checkpoint_decay[c]}});
    modes.push_back(json{{"eigenvalue_coeffs", coeffs_to_json(mode.coeffs)},
                         {"classification", to_string(mode.classification)},
                         {"certified", mode.certified},
                         {"checkpoints", checkpoints}});
  }
  return json{{"attractive", report.attractive}, {"horizon", report.horizon},
              {"threshold", report.threshold},  {"growth_delta", report.growth_delta},
              {"certified", report.certified},  {"note", report.note},
              {"modes", modes}};
}

}  // namespace qsteady
