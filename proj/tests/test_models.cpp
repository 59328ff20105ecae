#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>

#include "battery.hpp"
#include "oracles.hpp"
#include "qsteady/models.hpp"
#include "qsteady/random.hpp"

using namespace qsteady;

namespace {

std::vector<double> sorted_real_eigenvalues(const ComplexMatrix& m) {
  Eigen::ComplexEigenSolver<ComplexMatrix> es(m, false);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    CHECK(std::abs(es.eigenvalues()(i).imag()) < 1e-10);
    out.push_back(es.eigenvalues()(i).real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("hamiltonian_piece") {
  SUBCASE("zero Hamiltonian") {
    CHECK(hamiltonian_piece(ComplexMatrix::Zero(2, 2)).mat.norm() == 0.0);
  }
  SUBCASE("sigma_z/2 has eigenvalues {0, 0, +i, -i}") {
    const SuperOperator piece = hamiltonian_piece(0.5 * pauli_z());
    Eigen::ComplexEigenSolver<ComplexMatrix> es(piece.mat, false);
    std::vector<double> imags;
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(std::abs(es.eigenvalues()(i).real()) < 1e-12);
      imags.push_back(es.eigenvalues()(i).imag());
    }
    std::sort(imags.begin(), imags.end());
    CHECK(imags[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(imags[1]) < 1e-12);
    CHECK(std::abs(imags[2]) < 1e-12);
    CHECK(imags[3] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("annihilates operators commuting with H") {
    const SuperOperator piece = hamiltonian_piece(0.5 * pauli_z());
    CHECK(piece.apply(ComplexMatrix::Identity(2, 2) / 2.0).norm() < 1e-14);
  }
  SUBCASE("matches the direct commutator on random states") {
    Rng rng(11);
    const ComplexMatrix h = rng.hermitian(3);
    const SuperOperator piece = hamiltonian_piece(h);
    for (int trial = 0; trial < 5; ++trial) {
      const ComplexMatrix rho = rng.density_operator(3).matrix();
      CHECK((piece.apply(rho) - oracle::commute(h, rho)).norm() < 1e-12);
    }
  }
  SUBCASE("rejects a non-Hermitian Hamiltonian") {
    CHECK_THROWS_AS(hamiltonian_piece(pauli_minus()), InputError);
  }
}

TEST_CASE("dissipator_piece") {
  SUBCASE("lowering operator applied to the excited state") {
    const SuperOperator piece = dissipator_piece(pauli_minus());
    const ComplexMatrix image = piece.apply(basis_state(2, 1));
    CHECK((image - (basis_state(2, 0) - basis_state(2, 1))).norm() < 1e-14);
  }
  SUBCASE("identity jump is dissipationless") {
    CHECK(dissipator_piece(ComplexMatrix::Identity(2, 2)).mat.norm() < 1e-14);
  }
  SUBCASE("sigma_z dephasing eigenvalues {0, 0, -2, -2}") {
    const auto eigs = sorted_real_eigenvalues(dissipator_piece(pauli_z()).mat);
    CHECK(eigs[0] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(eigs[1] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(std::abs(eigs[2]) < 1e-12);
    CHECK(std::abs(eigs[3]) < 1e-12);
  }
  SUBCASE("matches the direct dissipator on random inputs") {
    Rng rng(12);
    const ComplexMatrix a = rng.ginibre(3, 3);
    const SuperOperator piece = dissipator_piece(a);
    for (int trial = 0; trial < 5; ++trial) {
      const ComplexMatrix rho = rng.density_operator(3).matrix();
      CHECK((piece.apply(rho) - oracle::dissipate(a, rho)).norm() < 1e-12);
    }
  }
}

TEST_CASE("generator pieces preserve trace and Hermiticity") {
  Rng rng(13);
  for (const auto& [name, model] : battery::commuting_battery()) {
    CAPTURE(name);
    for (const auto& term : model.terms()) {
      const ComplexMatrix id = ComplexMatrix::Identity(model.dim(), model.dim());
      CHECK(dual_map(term.piece).apply(id).norm() <= 1e-10 * std::max(1.0, term.piece.mat.norm()));
      for (int trial = 0; trial < 20; ++trial) {
        const ComplexMatrix x = rng.ginibre(model.dim(), model.dim());
        const ComplexMatrix lhs = term.piece.apply(x.adjoint());
        const ComplexMatrix rhs = term.piece.apply(x).adjoint();
        CHECK((lhs - rhs).norm() < 1e-10 * std::max(1.0, x.norm()));
      }
    }
  }
}

TEST_CASE("generator_at assembles rate-weighted pieces") {
  SUBCASE("single unit-rate term") {
    const GeneratorModel model = preset_amplitude_damping(RateFunction::constant(1.0));
    CHECK((model.generator_at(0.3).mat - model.terms()[0].piece.mat).norm() < 1e-15);
  }
  SUBCASE("two terms with rates 1 and t") {
    std::vector<GeneratorTerm> terms;
    terms.push_back(GeneratorTerm::dissipator(pauli_minus(), RateFunction::constant(1.0)));
    terms.push_back(GeneratorTerm::dissipator(pauli_z(), RateFunction::expression("t")));
    const GeneratorModel model(2, std::move(terms));
    const ComplexMatrix expected =
        model.terms()[0].piece.mat + 2.0 * model.terms()[1].piece.mat;
    CHECK((model.generator_at(2.0).mat - expected).norm() < 1e-14);
  }
  SUBCASE("two-qubit dephasing carries (g1 -+ g2)/2 coefficients") {
    const GeneratorModel model = preset_two_qubit_dephasing(
        RateFunction::constant(1.0), battery::exp_decay_rate());
    const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
    const ComplexMatrix j1 = kron(pauli_z(), id) - kron(id, pauli_z());
    const ComplexMatrix j2 = kron(pauli_z(), id) + kron(id, pauli_z());
    for (double t : {0.0, 0.8, 2.5}) {
      const double g1 = 1.0, g2 = std::exp(-t);
      const ComplexMatrix expected = oracle::lindblad_matrix(
          ComplexMatrix::Zero(4, 4), {j1, j2}, {(g1 - g2) / 2.0, (g1 + g2) / 2.0});
      CHECK((model.generator_at(t).mat - expected).norm() < 1e-12);
    }
  }
}

TEST_CASE("check_commutativity") {
  SUBCASE("single-term models commute") {
    const auto report =
        check_commutativity(preset_amplitude_damping(RateFunction::constant(1.0)));
    CHECK(report.commuting);
    CHECK(report.max_pair_residual == 0.0);
    CHECK(report.sampled_commuting);
  }
  SUBCASE("two-qubit dephasing pieces commute essentially exactly") {
    const auto report = check_commutativity(preset_two_qubit_dephasing(
        RateFunction::constant(1.0), RateFunction::constant(1.0 / 3.0)));
    CHECK(report.commuting);
    CHECK(report.max_pair_residual < 1e-12);
  }
  SUBCASE("double dot with both rates active does not commute") {
    const auto report = check_commutativity(battery::double_dot_both_rates());
    CHECK_FALSE(report.commuting);
    CHECK(report.max_pair_residual > 0.1);
    const auto& terms = battery::double_dot_both_rates().terms();
    const ComplexMatrix& g1 = terms[0].piece.mat;
    const ComplexMatrix& g2 = terms[1].piece.mat;
    CHECK((g1 * g2 - g2 * g1).norm() > 0.1);
  }
  SUBCASE("pairwise verdict implies small sampled commutators") {
    for (const auto& [name, model] : battery::commuting_battery()) {
      CAPTURE(name);
      const auto report = check_commutativity(model, 1e-9, 10);
      CHECK(report.commuting);
      CHECK(report.sampled_residual <= 10.0 * report.tolerance);
    }
  }
}

TEST_CASE("amplitude damping preset") {
  const auto eigs =
      sorted_real_eigenvalues(preset_amplitude_damping(RateFunction::constant(1.0))
                                  .generator_at(0.0)
                                  .mat);
  CHECK(eigs[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(eigs[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(eigs[2] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(std::abs(eigs[3]) < 1e-12);

  const GeneratorModel decaying = preset_amplitude_damping(RateFunction::expression("exp(-t)"));
  const GeneratorModel constant = preset_amplitude_damping(RateFunction::constant(1.0));
  CHECK((decaying.generator_at(0.0).mat - constant.generator_at(0.0).mat).norm() < 1e-14);
}

TEST_CASE("pure dephasing preset") {
  SUBCASE("single qubit fixed points are diagonal") {
    const GeneratorModel model = preset_pure_dephasing(1, {RateFunction::constant(1.0)});
    Eigen::JacobiSVD<ComplexMatrix> svd(model.generator_at(0.0).mat, Eigen::ComputeFullV);
    int kernel_dim = 0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      if (svd.singularValues()(i) < 1e-10) {
        ++kernel_dim;
        const ComplexMatrix fixed = devectorize(svd.matrixV().col(i), 2);
        CHECK(std::abs(fixed(0, 1)) < 1e-12);
        CHECK(std::abs(fixed(1, 0)) < 1e-12);
      }
    }
    CHECK(kernel_dim == 2);
  }
  SUBCASE("two equal-rate qubits match the correlated form with g2 = 0") {
    const GeneratorModel independent = preset_pure_dephasing(
        2, {RateFunction::constant(0.8), RateFunction::constant(0.8)});
    const GeneratorModel correlated = preset_two_qubit_dephasing(
        RateFunction::constant(0.8), RateFunction::constant(0.0));
    CHECK((independent.generator_at(1.3).mat - correlated.generator_at(1.3).mat).norm() < 1e-12);
  }
  SUBCASE("zero rates give the zero generator") {
    const GeneratorModel model =
        preset_pure_dephasing(2, {RateFunction::constant(0.0), RateFunction::constant(0.0)});
    CHECK(model.terms().empty());
    CHECK(model.generator_at(1.0).mat.norm() == 0.0);
  }
  SUBCASE("qubit count is bounded") {
    CHECK_THROWS_AS(preset_pure_dephasing(5, std::vector<RateFunction>(5, RateFunction::constant(1.0))),
                    InputError);
    CHECK_THROWS_AS(preset_pure_dephasing(2, {RateFunction::constant(1.0)}), InputError);
  }
}

TEST_CASE("two-qubit dephasing preset") {
  SUBCASE("equal rates leave only the collective term") {
    const GeneratorModel model = preset_two_qubit_dephasing(RateFunction::constant(1.0),
                                                            RateFunction::constant(1.0));
    REQUIRE(model.terms().size() == 1);
    const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
    const ComplexMatrix collective = kron(pauli_z(), id) + kron(id, pauli_z());
    CHECK((model.terms()[0].piece.mat - dissipator_piece(collective).mat).norm() < 1e-14);
  }
  SUBCASE("zero rates give the zero generator") {
    CHECK(preset_two_qubit_dephasing(RateFunction::constant(0.0), RateFunction::constant(0.0))
              .terms()
              .empty());
  }
  SUBCASE("equal expression rates also collapse to the collective term") {
    const RateFunction g = RateFunction::expression("exp(-t)");
    CHECK(preset_two_qubit_dephasing(g, g).terms().size() == 1);
  }
}

TEST_CASE("double dot preset") {
  const double phase = 0.7;
  const GeneratorModel model = preset_double_dot(phase, 0.0, RateFunction::constant(1.0),
                                                 RateFunction::constant(0.0), false);
  REQUIRE(model.terms().size() == 1);
  const ComplexMatrix jump = model.terms()[0].source_operator;

  SUBCASE("the collective mode is fermionic") {
    const ComplexMatrix anticommutator = jump * jump.adjoint() + jump.adjoint() * jump;
    CHECK((anticommutator - ComplexMatrix::Identity(4, 4)).norm() < 1e-12);
    CHECK((jump * jump).norm() < 1e-14);
  }
  SUBCASE("rate convention doubles kappa") {
    CHECK(model.terms()[0].rate.constant_value() == 2.0);
  }
  SUBCASE("dark subspace: kernel of the jump is vacuum plus the phased singlet") {
    Eigen::JacobiSVD<ComplexMatrix> svd(jump, Eigen::ComputeFullV);
    int kernel_dim = 0;
    for (Eigen::Index i = 0; i < 4; ++i)
      if (svd.singularValues()(i) < 1e-12) ++kernel_dim;
    CHECK(kernel_dim == 2);

    ComplexVector vacuum = ComplexVector::Zero(4);
    vacuum(0) = 1.0;
    ComplexVector dark = ComplexVector::Zero(4);
    dark(2) = 1.0 / std::sqrt(2.0);                                  // |10>
    dark(1) = -std::exp(Complex(0.0, -phase)) / std::sqrt(2.0);      // |01>
    CHECK((jump * vacuum).norm() < 1e-14);
    CHECK((jump * dark).norm() < 1e-14);
  }
  SUBCASE("large-bias regime commutes, including with the Hamiltonian") {
    CHECK(check_commutativity(model).commuting);
    const GeneratorModel with_h = preset_double_dot(phase, 0.9, RateFunction::constant(1.0),
                                                    RateFunction::constant(0.0), true);
    CHECK(with_h.terms().size() == 2);
    CHECK(check_commutativity(with_h).commuting);
  }
  SUBCASE("both rates active breaks commutativity") {
    CHECK_FALSE(check_commutativity(battery::double_dot_both_rates()).commuting);
  }
}

TEST_CASE("model JSON round trips") {
  SUBCASE("minimal document is amplitude damping") {
    const json doc = {
        {"dimension", 2},
        {"terms", json::array({json{
                      {"rate", {{"kind", "constant"}, {"value", 1.0}}},
                      {"jump", json::array({json::array({0.0, 0.0}), json::array({1.0, 0.0}),
                                            json::array({0.0, 0.0}), json::array({0.0, 0.0})})},
                  }})},
    };
    const GeneratorModel model = load_model(doc);
    const GeneratorModel reference = preset_amplitude_damping(RateFunction::constant(1.0));
    CHECK((model.generator_at(0.0).mat - reference.generator_at(0.0).mat).norm() < 1e-14);
  }
  SUBCASE("save-load round trip is the identity") {
    for (const auto& [name, model] : battery::commuting_battery()) {
      CAPTURE(name);
      const json saved = save_model(model);
      const GeneratorModel loaded = load_model(saved);
      CHECK(save_model(loaded) == saved);
      REQUIRE(loaded.terms().size() == model.terms().size());
      for (size_t k = 0; k < model.terms().size(); ++k) {
        CHECK((loaded.terms()[k].source_operator.array() ==
               model.terms()[k].source_operator.array())
                  .all());
        CHECK(loaded.terms()[k].rate.describe() == model.terms()[k].rate.describe());
      }
    }
  }
  SUBCASE("dimension mismatch names the offending term") {
    json doc = save_model(preset_amplitude_damping(RateFunction::constant(1.0)));
    doc["terms"][0]["jump"] = json::array();
    for (int i = 0; i < 9; ++i) doc["terms"][0]["jump"].push_back(json::array({1.0, 0.0}));
    try {
      load_model(doc);
      FAIL("expected a dimension error");
    } catch (const InputError& err) {
      CHECK(std::string(err.what()).find("/terms/0/jump") != std::string::npos);
    }
  }
  SUBCASE("non-Hermitian Hamiltonian is rejected") {
    json doc = {{"dimension", 2},
                {"hamiltonian",
                 json::array({json::array({0.0, 0.0}), json::array({1.0, 0.0}),
                              json::array({0.0, 0.0}), json::array({0.0, 0.0})})},
                {"terms", json::array()}};
    CHECK_THROWS_AS(load_model(doc), InputError);
  }
  SUBCASE("schema violations carry JSON paths") {
    CHECK_THROWS_AS(load_model(json::array()), InputError);
    CHECK_THROWS_AS(load_model(json{{"terms", json::array()}}), InputError);
    CHECK_THROWS_AS(load_model(json{{"dimension", 2}}), InputError);
    CHECK_THROWS_AS(load_model(json{{"dimension", 2}, {"terms", json::array()}, {"extra", 1}}),
                    InputError);
    CHECK_THROWS_AS(load_model(json{{"dimension", 40}, {"terms", json::array()}}), InputError);
  }
  SUBCASE("missing files are reported with their path") {
    try {
      load_model_file("/nonexistent/model.json");
      FAIL("expected an error");
    } catch (const InputError& err) {
      CHECK(std::string(err.what()).find("/nonexistent/model.json") != std::string::npos);
    }
  }
}
