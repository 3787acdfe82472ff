#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "qtraj/dynamics.hpp"
#include "qtraj/hilbert.hpp"

namespace qtraj {

// tr rho^2.  For a hermitian matrix this is the squared Frobenius norm.
inline double purity(const DensityMatrix& rho) {
  return rho.matrix().squaredNorm();
}

// <alpha| rho |alpha> against the truncated coherent state on the same
// ladder.  rho must describe the field.
inline double coherent_fidelity(const DensityMatrix& rho, Complex alpha) {
  if (rho.label() != Subsystem::field)
    throw DimensionMismatch("coherent_fidelity needs a field density matrix, got " +
                            std::string(to_string(rho.label())));
  const SpaceDescriptor space(static_cast<int>(rho.dim()));
  const Vector v = coherent_state(alpha, space);
  return (v.adjoint() * rho.matrix() * v).value().real();
}

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// (tr rho sigma_x, tr rho sigma_y, tr rho sigma_z) for a 2x2 atomic density
// matrix in the (g, e) ordering; the ground state sits at z = -1.
inline BlochVector bloch_vector(const DensityMatrix& rho) {
  if (rho.label() != Subsystem::atom || rho.dim() != 2)
    throw DimensionMismatch("bloch_vector needs a 2x2 atom density matrix");
  const Matrix& m = rho.matrix();
  return {2.0 * m(0, 1).real(), 2.0 * m(0, 1).imag(),
          m(1, 1).real() - m(0, 0).real()};
}

namespace detail {

inline double binary_entropy_bits(double lam) {
  auto h = [](double x) {
    return (x <= 0.0 || x >= 1.0) ? 0.0 : -x * std::log2(x);
  };
  return h(lam) + h(1.0 - lam);
}

// Entanglement entropy straight from joint amplitudes: the reduced atom
// matrix is 2x2, so its spectrum is available in closed form.
inline double entropy_from_amplitudes(const Vector& psi, int fock_dim) {
  const Complex* gs = psi.data();
  const Complex* es = psi.data() + fock_dim;
  double pg = 0.0, pe = 0.0;
  Complex coh(0.0, 0.0);
  for (int n = 0; n < fock_dim; ++n) {
    pg += std::norm(gs[n]);
    pe += std::norm(es[n]);
    coh += gs[n] * std::conj(es[n]);
  }
  const double trace = pg + pe;
  const double disc =
      std::sqrt((pg - pe) * (pg - pe) + 4.0 * std::norm(coh));
  double lam = 0.5 * (trace + disc) / trace;
  lam = std::clamp(lam, 0.0, 1.0);
  return binary_entropy_bits(lam);
}

}  // namespace detail

// von Neumann entropy (base 2) of the atom's reduced state of a pure joint
// state.  0 for products, 1 for maximally entangled.
inline double entanglement_entropy(const JointState& state) {
  return detail::entropy_from_amplitudes(state.amplitudes(),
                                         state.space().fock_dim());
}

// Reduced 2x2 atom density matrix of a pure joint state.
inline DensityMatrix atom_density(const JointState& state) {
  const int d = state.space().fock_dim();
  const Complex* gs = state.amplitudes().data();
  const Complex* es = state.amplitudes().data() + d;
  double pg = 0.0, pe = 0.0;
  Complex coh(0.0, 0.0);
  for (int n = 0; n < d; ++n) {
    pg += std::norm(gs[n]);
    pe += std::norm(es[n]);
    coh += gs[n] * std::conj(es[n]);
  }
  Matrix m(2, 2);
  m(0, 0) = pg;
  m(1, 1) = pe;
  m(0, 1) = coh;
  m(1, 0) = std::conj(coh);
  return DensityMatrix(std::move(m), Subsystem::atom);
}

// Number of detector clicks recorded up to and including time t.
inline std::int64_t jump_count(const TrajectoryRecord& record, double t) {
  if (!(t >= 0.0 && t <= record.t_final + 1e-12 * std::max(1.0, record.t_final)))
    throw InvalidParams("jump_count time " + std::to_string(t) +
                        " outside [0, t_final]");
  const auto it = std::upper_bound(record.jump_times.begin(),
                                   record.jump_times.end(), t + 1e-12);
  return static_cast<std::int64_t>(it - record.jump_times.begin());
}

struct EntanglementLeap {
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  double delta_e = 0.0;
};

// Entropy discontinuity caused by one detector click at t_star, conditioned
// on no clicks before it: evolve the no-jump branch to t_star, apply the
// jump, compare entropies.
inline EntanglementLeap entanglement_leap(const SimParams& params,
                                          double t_star) {
  const SimParams rp = params.resolved();
  if (!(t_star > 0.0 && t_star <= rp.t_final))
    throw InvalidParams("t_star must lie in (0, t_final]");
  const JointState before = no_jump_trajectory(rp, t_star);
  const detail::StepKernel kernel(rp);
  const auto m = kernel.moments(before.amplitudes());
  if (m.weighted < 1e-14)
    throw ZeroNormJump("no photons to emit at t_star = " +
                       std::to_string(t_star));
  Vector jumped(before.amplitudes().size());
  kernel.apply_lower(before.amplitudes(), jumped);
  const JointState after =
      JointState(std::move(jumped), before.space()).normalized();
  EntanglementLeap leap;
  leap.entropy_before = entanglement_entropy(before);
  leap.entropy_after = entanglement_entropy(after);
  leap.delta_e = std::abs(leap.entropy_after - leap.entropy_before);
  return leap;
}

}  // namespace qtraj
