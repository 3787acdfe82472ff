// Observable extraction tests.  Entropies and Bloch components are checked
// against closed-form values and against a full eigendecomposition done
// independently of the closed-form 2x2 path used by the library.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "qtraj/dynamics.hpp"
#include "qtraj/hilbert.hpp"
#include "qtraj/observables.hpp"

namespace {

using qtraj::Complex;
using qtraj::Matrix;
using qtraj::Vector;

constexpr double kPi = std::numbers::pi;

qtraj::JointState random_state(const qtraj::SpaceDescriptor& space,
                               unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(space.joint_dim());
  for (int i = 0; i < space.joint_dim(); ++i)
    v(i) = Complex(dist(gen), dist(gen));
  v /= v.norm();
  return qtraj::JointState(std::move(v), space);
}

// Atom basis state embedded in the joint space with the field in |n>.
qtraj::JointState basis_state(const qtraj::SpaceDescriptor& space, int atom,
                              int n) {
  Vector v = Vector::Zero(space.joint_dim());
  v(space.index(atom, n)) = 1.0;
  return qtraj::JointState(std::move(v), space);
}

double entropy_by_eigensolver(const qtraj::DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(),
                                           Eigen::EigenvaluesOnly);
  double e = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam > 1e-15) e -= lam * std::log2(lam);
  }
  return e;
}

}  // namespace

TEST_CASE("purity of pure, mixed, and intermediate states") {
  Matrix pure(2, 2);
  pure << 1.0, 0.0, 0.0, 0.0;
  CHECK(qtraj::purity(qtraj::DensityMatrix(pure, qtraj::Subsystem::atom)) ==
        Catch::Approx(1.0).margin(1e-15));

  Matrix mixed = 0.5 * Matrix::Identity(2, 2);
  CHECK(qtraj::purity(qtraj::DensityMatrix(mixed, qtraj::Subsystem::atom)) ==
        Catch::Approx(0.5).margin(1e-15));

  Matrix skew(2, 2);
  skew << 0.25, 0.0, 0.0, 0.75;
  CHECK(qtraj::purity(qtraj::DensityMatrix(skew, qtraj::Subsystem::atom)) ==
        Catch::Approx(0.625).margin(1e-15));
}

TEST_CASE("coherent fidelity reproduces the gaussian overlap") {
  const qtraj::SpaceDescriptor field(16);
  const Complex alpha(0.3, -0.4);

  const Vector va = qtraj::coherent_state(alpha, field);
  const qtraj::DensityMatrix rho_a(va * va.adjoint(), qtraj::Subsystem::field);
  CHECK(qtraj::coherent_fidelity(rho_a, alpha) ==
        Catch::Approx(1.0).margin(1e-12));

  // |<alpha|beta>|^2 = exp(-|alpha - beta|^2).
  const Complex beta(-0.2, 0.5);
  const Vector vb = qtraj::coherent_state(beta, field);
  const qtraj::DensityMatrix rho_b(vb * vb.adjoint(), qtraj::Subsystem::field);
  CHECK(qtraj::coherent_fidelity(rho_b, alpha) ==
        Catch::Approx(std::exp(-std::norm(alpha - beta))).epsilon(1e-10));

  Matrix atom = 0.5 * Matrix::Identity(2, 2);
  CHECK_THROWS_AS(
      qtraj::coherent_fidelity(
          qtraj::DensityMatrix(atom, qtraj::Subsystem::atom), alpha),
      qtraj::DimensionMismatch);
}

TEST_CASE("bloch vector of the cardinal atom states") {
  const qtraj::SpaceDescriptor space(4);
  auto bloch_of = [&](const qtraj::JointState& s) {
    return qtraj::bloch_vector(qtraj::atom_density(s));
  };

  const auto bg = bloch_of(basis_state(space, 0, 0));
  CHECK(bg.x == Catch::Approx(0.0).margin(1e-15));
  CHECK(bg.y == Catch::Approx(0.0).margin(1e-15));
  CHECK(bg.z == Catch::Approx(-1.0).margin(1e-15));

  const auto be = bloch_of(basis_state(space, 1, 0));
  CHECK(be.z == Catch::Approx(1.0).margin(1e-15));

  Vector plus = Vector::Zero(space.joint_dim());
  plus(space.index(0, 0)) = 1.0 / std::sqrt(2.0);
  plus(space.index(1, 0)) = 1.0 / std::sqrt(2.0);
  const auto bx = bloch_of(qtraj::JointState(plus, space));
  CHECK(bx.x == Catch::Approx(1.0).margin(1e-15));
  CHECK(bx.y == Catch::Approx(0.0).margin(1e-15));
  CHECK(bx.z == Catch::Approx(0.0).margin(1e-15));

  // (|g> + i|e>)/sqrt(2) points along -y in this convention: the coherence
  // <g|rho|e> = -i/2, and y = 2 Im <g|rho|e>.
  Vector ypls = Vector::Zero(space.joint_dim());
  ypls(space.index(0, 0)) = 1.0 / std::sqrt(2.0);
  ypls(space.index(1, 0)) = Complex(0.0, 1.0) / std::sqrt(2.0);
  const auto by = bloch_of(qtraj::JointState(ypls, space));
  CHECK(by.x == Catch::Approx(0.0).margin(1e-15));
  CHECK(by.y == Catch::Approx(-1.0).margin(1e-15));
  CHECK(by.z == Catch::Approx(0.0).margin(1e-15));

  Matrix big = Matrix::Identity(3, 3) / 3.0;
  CHECK_THROWS_AS(
      qtraj::bloch_vector(qtraj::DensityMatrix(big, qtraj::Subsystem::atom)),
      qtraj::DimensionMismatch);
  Matrix field2 = 0.5 * Matrix::Identity(2, 2);
  CHECK_THROWS_AS(
      qtraj::bloch_vector(qtraj::DensityMatrix(field2, qtraj::Subsystem::field)),
      qtraj::DimensionMismatch);
}

TEST_CASE("bloch vector is consistent with the operator traces") {
  const qtraj::SpaceDescriptor space(8);
  const auto ops = qtraj::build_operators(space);
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto psi = random_state(space, seed);
    const Vector& v = psi.amplitudes();
    const auto b = qtraj::bloch_vector(qtraj::atom_density(psi));
    const double x = (v.dot(ops.sigma_x.matrix * v)).real();
    const double y = (v.dot(ops.sigma_y.matrix * v)).real();
    const double z = (v.dot(ops.sigma_z.matrix * v)).real();
    CHECK(b.x == Catch::Approx(x).margin(1e-13));
    CHECK(b.y == Catch::Approx(y).margin(1e-13));
    CHECK(b.z == Catch::Approx(z).margin(1e-13));
  }
}

TEST_CASE("bloch norm squared equals twice the purity minus one") {
  const qtraj::SpaceDescriptor space(10);
  for (unsigned seed : {7u, 8u, 9u, 10u}) {
    const auto rho = qtraj::atom_density(random_state(space, seed));
    const auto b = qtraj::bloch_vector(rho);
    CHECK(b.norm() * b.norm() ==
          Catch::Approx(2.0 * qtraj::purity(rho) - 1.0).margin(1e-12));
  }
}

TEST_CASE("entanglement entropy of separable and maximally entangled states") {
  const qtraj::SpaceDescriptor space(8);

  // Product state (cg|g> + ce|e>) tensor |alpha>.
  const Complex cg(0.6, 0.0);
  const Complex ce(0.0, 0.8);
  const Vector field = qtraj::coherent_state(Complex(0.4, -0.3), space);
  Vector prod(space.joint_dim());
  prod.head(space.fock_dim()) = cg * field;
  prod.tail(space.fock_dim()) = ce * field;
  CHECK(qtraj::entanglement_entropy(qtraj::JointState(prod, space)) <
        1e-10);

  // (|g,1> + |e,0>)/sqrt(2) carries exactly one bit.
  Vector bell = Vector::Zero(space.joint_dim());
  bell(space.index(0, 1)) = 1.0 / std::sqrt(2.0);
  bell(space.index(1, 0)) = 1.0 / std::sqrt(2.0);
  CHECK(qtraj::entanglement_entropy(qtraj::JointState(bell, space)) ==
        Catch::Approx(1.0).margin(1e-10));

  // sqrt(p)|g,1> + sqrt(1-p)|e,0> carries the binary entropy of p.
  const double pr = 0.3;
  Vector skew = Vector::Zero(space.joint_dim());
  skew(space.index(0, 1)) = std::sqrt(pr);
  skew(space.index(1, 0)) = std::sqrt(1.0 - pr);
  const double h2 = -pr * std::log2(pr) - (1.0 - pr) * std::log2(1.0 - pr);
  CHECK(qtraj::entanglement_entropy(qtraj::JointState(skew, space)) ==
        Catch::Approx(h2).epsilon(1e-12));
}

TEST_CASE("closed-form entropy matches a full eigendecomposition") {
  const qtraj::SpaceDescriptor space(12);
  for (unsigned seed : {21u, 22u, 23u, 24u, 25u}) {
    const auto psi = random_state(space, seed);
    const auto rho = qtraj::atom_density(psi);
    CHECK(qtraj::entanglement_entropy(psi) ==
          Catch::Approx(entropy_by_eigensolver(rho)).margin(1e-12));
    // Entropy is blind to a global phase (up to rounding of the rotated
    // amplitudes).
    const qtraj::JointState rotated(
        Vector(psi.amplitudes() * std::exp(Complex(0.0, 0.7))), space);
    CHECK(qtraj::entanglement_entropy(rotated) ==
          Catch::Approx(qtraj::entanglement_entropy(psi)).margin(1e-13));
  }
}

TEST_CASE("reduced atom matrix agrees with the generic partial trace") {
  const qtraj::SpaceDescriptor space(10);
  for (unsigned seed : {31u, 32u}) {
    const auto psi = random_state(space, seed);
    const Matrix rho_joint =
        psi.amplitudes() * psi.amplitudes().adjoint();
    const auto traced = qtraj::partial_trace(
        qtraj::DensityMatrix(rho_joint, qtraj::Subsystem::joint),
        qtraj::Subsystem::atom);
    const auto direct = qtraj::atom_density(psi);
    CHECK((traced.matrix() - direct.matrix()).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("click counting respects the record boundaries") {
  qtraj::TrajectoryRecord rec;
  rec.t_final = 1.0;
  rec.jump_times = {0.1, 0.5, 0.5, 0.9};

  CHECK(qtraj::jump_count(rec, 0.0) == 0);
  CHECK(qtraj::jump_count(rec, 0.0999) == 0);
  CHECK(qtraj::jump_count(rec, 0.1) == 1);
  CHECK(qtraj::jump_count(rec, 0.3) == 1);
  CHECK(qtraj::jump_count(rec, 0.5) == 3);
  CHECK(qtraj::jump_count(rec, 0.9) == 4);
  CHECK(qtraj::jump_count(rec, 1.0) == 4);
  CHECK_THROWS_AS(qtraj::jump_count(rec, -0.1), qtraj::InvalidParams);
  CHECK_THROWS_AS(qtraj::jump_count(rec, 1.1), qtraj::InvalidParams);

  qtraj::TrajectoryRecord quiet;
  quiet.t_final = 2.0;
  CHECK(qtraj::jump_count(quiet, 2.0) == 0);
}

TEST_CASE("entropy leap under a conditioned click") {
  qtraj::SimParams p;
  p.g = 1.0;
  p.F = 1.0;
  p.gamma = 2.0;
  p.fock_dim = 16;
  p.t_final = kPi;

  const auto leap = qtraj::entanglement_leap(p, kPi / 4.0);
  CHECK(leap.entropy_before > 0.0);
  CHECK(leap.entropy_before <= 1.0);
  CHECK(leap.entropy_after >= 0.0);
  CHECK(leap.entropy_after <= 1.0);
  CHECK(leap.delta_e ==
        Catch::Approx(std::abs(leap.entropy_after - leap.entropy_before))
            .margin(1e-15));

  CHECK_THROWS_AS(qtraj::entanglement_leap(p, 0.0), qtraj::InvalidParams);
  CHECK_THROWS_AS(qtraj::entanglement_leap(p, 4.0), qtraj::InvalidParams);
}

TEST_CASE("decoupled atom never entangles, so the leap vanishes") {
  qtraj::SimParams p;
  p.g = 0.0;
  p.F = 1.0;
  p.gamma = 2.0;
  p.fock_dim = 16;
  p.t_final = 1.0;

  const auto leap = qtraj::entanglement_leap(p, 0.5);
  CHECK(leap.entropy_before < 1e-10);
  CHECK(leap.entropy_after < 1e-10);
  CHECK(leap.delta_e < 1e-10);
}

TEST_CASE("a click cannot be conditioned on an empty cavity") {
  qtraj::SimParams p;
  p.g = 0.0;
  p.F = 0.0;
  p.gamma = 2.0;
  p.fock_dim = 8;
  p.t_final = 1.0;
  p.alpha_override = Complex(0.0, 0.0);
  CHECK_THROWS_AS(qtraj::entanglement_leap(p, 0.5), qtraj::ZeroNormJump);
}
