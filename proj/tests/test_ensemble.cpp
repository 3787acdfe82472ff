// Ensemble reconstruction tests: deterministic seeding, worker-count
// independence, agreement with single trajectories, and the click/entropy
// statistics of the decoupled (g = 0) cavity where every moment is known.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "qtraj/dynamics.hpp"
#include "qtraj/ensemble.hpp"
#include "qtraj/hilbert.hpp"
#include "qtraj/observables.hpp"
#include "qtraj/rng.hpp"

namespace {

using qtraj::Complex;
using qtraj::Matrix;
using qtraj::Vector;

constexpr double kPi = std::numbers::pi;

qtraj::SimParams coupled_preset() {
  qtraj::SimParams p;
  p.g = 1.0;
  p.F = 1.0;
  p.gamma = 2.0;
  p.fock_dim = 16;
  p.t_final = kPi;
  return p;
}

qtraj::SimParams decoupled_preset(int fock_dim, double t_final) {
  qtraj::SimParams p;
  p.g = 0.0;
  p.F = 1.0;
  p.gamma = 2.0;
  p.fock_dim = fock_dim;
  p.t_final = t_final;
  return p;
}

}  // namespace

TEST_CASE("ensemble averages are bit-identical for any worker count") {
  const auto p = coupled_preset();
  const auto times = qtraj::uniform_times(21, p.t_final);
  const auto r1 = qtraj::run_ensemble(p, 64, 11, times, 1);
  const auto r2 = qtraj::run_ensemble(p, 64, 11, times, 2);
  const auto r8 = qtraj::run_ensemble(p, 64, 11, times, 8);
  const auto r32 = qtraj::run_ensemble(p, 64, 11, times, 32);

  REQUIRE(r1.sample_times.size() == 21);
  for (std::size_t t = 0; t < r1.sample_times.size(); ++t) {
    for (const auto* other : {&r2, &r8, &r32}) {
      CHECK((r1.mean_density[t].matrix() - other->mean_density[t].matrix())
                .cwiseAbs()
                .maxCoeff() == 0.0);
      CHECK(r1.mean_entropy[t] == other->mean_entropy[t]);
      CHECK(r1.sem_entropy[t] == other->sem_entropy[t]);
      CHECK(r1.mean_jump_count[t] == other->mean_jump_count[t]);
      CHECK(r1.sem_jump_count[t] == other->sem_jump_count[t]);
    }
  }
}

TEST_CASE("a one-trajectory ensemble reproduces that trajectory exactly") {
  auto p = coupled_preset();
  p.t_final = 1.0;
  const double times[] = {0.0, 0.5, 1.0};
  const std::uint64_t base_seed = 5;
  const auto res =
      qtraj::run_ensemble(p, 1, base_seed, std::span<const double>(times), 1);
  const auto rec = qtraj::run_trajectory(p, qtraj::mix_seed(base_seed, 0),
                                         std::span<const double>(times));

  REQUIRE(res.sample_times.size() == 3);
  REQUIRE(rec.states.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    const Matrix proj =
        rec.states[t].amplitudes() * rec.states[t].amplitudes().adjoint();
    CHECK((res.mean_density[t].matrix() - proj).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.mean_entropy[t] == qtraj::entanglement_entropy(rec.states[t]));
    CHECK(res.sem_entropy[t] == 0.0);
    CHECK(res.mean_jump_count[t] ==
          double(qtraj::jump_count(rec, res.sample_times[t])));
  }
}

TEST_CASE("reconstructed density matrices are physical") {
  auto p = coupled_preset();
  p.t_final = 1.0;
  const auto times = qtraj::uniform_times(6, p.t_final);
  const auto res = qtraj::run_ensemble(p, 200, 17, times);
  for (const auto& rho : res.mean_density) {
    CHECK(rho.label() == qtraj::Subsystem::joint);
    CHECK(std::abs(rho.matrix().trace() - Complex(1.0, 0.0)) < 1e-12);
    CHECK(rho.min_eigenvalue() > -1e-10);
  }
}

TEST_CASE("decoupled ensemble collapses onto the drive-balanced projector") {
  // Every unraveling of the g = 0 cavity sits in |g, alpha>, so the mean
  // density matches the pure projector to the ladder-truncation floor and
  // the entropy spread is identically zero.
  const auto p = decoupled_preset(20, 1.0);
  const auto rp = p.resolved();
  const double times[] = {0.0, 0.5, 1.0};
  const auto res =
      qtraj::run_ensemble(rp, 50, 23, std::span<const double>(times));

  const qtraj::SpaceDescriptor space(rp.fock_dim);
  Vector target = Vector::Zero(space.joint_dim());
  target.head(rp.fock_dim) = qtraj::coherent_state(rp.steady_alpha(), space);
  const qtraj::DensityMatrix rho_ref(target * target.adjoint(),
                                     qtraj::Subsystem::joint);

  for (std::size_t t = 0; t < res.sample_times.size(); ++t) {
    CHECK(qtraj::trace_distance(res.mean_density[t], rho_ref) < 1e-8);
    CHECK(res.mean_entropy[t] < 1e-10);
    CHECK(res.sem_entropy[t] < 1e-10);
  }
}

TEST_CASE("decoupled click statistics follow the constant-rate counter") {
  // At g = 0 each step clicks with probability gamma dt |alpha|^2 = 0.01
  // independent of history, so the count at t = 1 has mean 2 and variance
  // 200 * 0.01 * 0.99 = 1.98.
  const auto p = decoupled_preset(16, 1.0);
  const double times[] = {1.0};
  const auto res =
      qtraj::run_ensemble(p, 500, 29, std::span<const double>(times));

  const double mean = res.mean_jump_count.back();
  const double sem = res.sem_jump_count.back();
  CHECK(sem > 0.04);
  CHECK(sem < 0.09);
  CHECK(std::abs(mean - 2.0) < 3.0 * sem);
}

TEST_CASE("sampled-time lookup is exact about its grid") {
  const auto p = decoupled_preset(16, 1.0);
  const double times[] = {0.0, 0.25, 1.0};
  const auto res =
      qtraj::run_ensemble(p, 4, 31, std::span<const double>(times));
  CHECK(qtraj::average_entropy(res, 0.25) == res.mean_entropy[1]);
  // Within half a step of the grid still resolves.
  CHECK(qtraj::average_entropy(res, 0.25 + 0.4 * res.params.dt) ==
        res.mean_entropy[1]);
  CHECK_THROWS_AS(qtraj::average_entropy(res, 0.12345),
                  qtraj::TimeNotSampled);
}

TEST_CASE("trace distance on known pairs") {
  Matrix a(2, 2), b(2, 2);
  a << 1.0, 0.0, 0.0, 0.0;
  b << 0.5, 0.0, 0.0, 0.5;
  const qtraj::DensityMatrix ra(a, qtraj::Subsystem::atom);
  const qtraj::DensityMatrix rb(b, qtraj::Subsystem::atom);
  CHECK(qtraj::trace_distance(ra, rb) == Catch::Approx(0.5).margin(1e-14));
  CHECK(qtraj::trace_distance(ra, ra) == Catch::Approx(0.0).margin(1e-14));

  const qtraj::DensityMatrix rf(b, qtraj::Subsystem::field);
  CHECK_THROWS_AS(qtraj::trace_distance(ra, rf), qtraj::DimensionMismatch);
  Matrix wide = Matrix::Identity(3, 3) / 3.0;
  CHECK_THROWS_AS(
      qtraj::trace_distance(ra,
                            qtraj::DensityMatrix(wide, qtraj::Subsystem::atom)),
      qtraj::DimensionMismatch);
}

TEST_CASE("ensemble reconstruction approaches the master equation") {
  auto p = coupled_preset();
  p.t_final = 1.0;
  const auto times = qtraj::uniform_times(6, p.t_final);
  const auto res = qtraj::run_ensemble(p, 500, 37, times);
  const auto rep = qtraj::convergence_report(res);

  REQUIRE(rep.trace_distances.size() == 6);
  CHECK(rep.trace_distances.front() < 1e-12);  // identical initial states
  CHECK(rep.max_trace_distance < 0.15);
  CHECK(rep.max_sem_entropy > 0.0);
  CHECK(rep.max_sem_entropy < 0.05);
  CHECK(rep.max_sem_jump_count < 0.1);
}

TEST_CASE("ensemble input validation") {
  const auto p = decoupled_preset(16, 1.0);
  const double times[] = {0.5};
  CHECK_THROWS_AS(
      qtraj::run_ensemble(p, 0, 1, std::span<const double>(times)),
      qtraj::InvalidParams);
  CHECK_THROWS_AS(
      qtraj::run_ensemble(p, 4, 1, std::span<const double>()),
      qtraj::InvalidParams);
}

TEST_CASE("worker failures surface as the original exception") {
  // The unbounded drive overflows the 6-level ladder partway through, on
  // every stripe; the first stripe's error must come back intact.
  qtraj::SimParams p;
  p.g = 0.0;
  p.F = 0.5;
  p.gamma = 0.0;
  p.fock_dim = 6;
  p.t_final = kPi;
  p.alpha_override = Complex(0.0, 0.0);
  const double times[] = {kPi};
  CHECK_THROWS_AS(
      qtraj::run_ensemble(p, 32, 1, std::span<const double>(times), 4),
      qtraj::TruncationError);
}

TEST_CASE("leaked information combines the leap with the click rate") {
  auto p = coupled_preset();
  const double t_star = kPi / 4.0;

  CHECK_THROWS_AS(qtraj::leaked_information(p, t_star, 50, 1),
                  qtraj::InvalidParams);

  const auto la = qtraj::leaked_information(p, t_star, 200, 43);
  const auto leap = qtraj::entanglement_leap(p, t_star);
  CHECK(la.gamma == 2.0);
  // t_star is reported where the sample landed on the step grid.
  CHECK(la.t_star ==
        Catch::Approx(t_star).margin(0.5 * p.resolved().dt + 1e-12));
  CHECK(la.entropy_before == leap.entropy_before);
  CHECK(la.entropy_after == leap.entropy_after);
  CHECK(la.delta_e == leap.delta_e);
  CHECK(la.mean_jump_count > 0.0);
  CHECK(la.e_leak == la.delta_e * la.mean_jump_count);
}

TEST_CASE("decoupled cavity leaks nothing") {
  const auto p = decoupled_preset(16, 1.0);
  const auto la = qtraj::leaked_information(p, 0.5, 400, 47);
  CHECK(la.delta_e < 1e-10);
  CHECK(la.e_leak < 1e-10);
  // Clicks by t* = 0.5 average gamma |alpha|^2 t* = 1.
  CHECK(std::abs(la.mean_jump_count - 1.0) < 0.2);
}
