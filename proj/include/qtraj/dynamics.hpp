#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qtraj/hilbert.hpp"
#include "qtraj/params.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

// One stochastic step: the normalized post-step state, whether the photon
// counter fired, and the jump probability that was used for the draw.
struct StepOutcome {
  JointState state;
  bool jumped;
  double jump_probability;
};

// Everything recorded along a single unraveling.  jump_states[k] is the
// normalized state immediately after the jump at jump_times[k].  t_final is
// the discretized horizon the scan actually ran to (the requested horizon
// rounded to the step grid), so every recorded time lies in [0, t_final].
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<JointState> states;
  std::vector<double> jump_times;
  std::vector<JointState> jump_states;
  std::uint64_t seed = 0;
  double t_final = 0.0;

  std::int64_t jump_count() const {
    return static_cast<std::int64_t>(jump_times.size());
  }
};

// Hermitian part of the generator: g(s- adag + s+ a) + F(a + adag).
inline Operator build_hamiltonian(const SimParams& params) {
  const SimParams rp = params.resolved();
  const SpaceDescriptor space(rp.fock_dim);
  const OperatorSet ops = build_operators(space);
  Matrix h = rp.g * (ops.sigma_minus.matrix * ops.a_dag.matrix +
                     ops.sigma_plus.matrix * ops.a.matrix) +
             rp.F * (ops.a.matrix + ops.a_dag.matrix);
  return Operator(std::move(h), space);
}

// Non-hermitian no-jump generator: H - i (gamma/2) adag a.
inline Operator build_effective_hamiltonian(const SimParams& params) {
  const SimParams rp = params.resolved();
  const SpaceDescriptor space(rp.fock_dim);
  const OperatorSet ops = build_operators(space);
  Matrix h = build_hamiltonian(rp).matrix +
             Complex(0.0, -0.5 * rp.gamma) * (ops.a_dag.matrix * ops.a.matrix);
  return Operator(std::move(h), space);
}

namespace detail {

// Applies the step maps through the ladder structure of the generator in
// O(joint_dim) per step instead of a dense matvec.  The no-jump map
// W0 = I - i dt H_eff splits into a real diagonal shrink (1 - dt gamma n / 2)
// plus pure-imaginary couplings to the four ladder neighbours, so the inner
// loop is all real-coefficient arithmetic.
//
// Each apply also returns the squared norm and the photon-number-weighted
// squared norm of its output, so callers never need a second pass to decide
// the next jump probability.
class StepKernel {
 public:
  struct Moments {
    double total;     // sum |psi|^2
    double weighted;  // sum n |psi|^2
  };

  explicit StepKernel(const SimParams& resolved)
      : d_(resolved.fock_dim),
        dt_(resolved.dt),
        g_(resolved.g),
        f_(resolved.F),
        gamma_(resolved.gamma),
        sq_(d_ + 1),
        cg_(d_ + 1),
        cf_(d_ + 1),
        kappa_(d_) {
    for (int n = 0; n <= d_; ++n) {
      sq_[n] = std::sqrt(double(n));
      cg_[n] = dt_ * g_ * sq_[n];
      cf_[n] = dt_ * f_ * sq_[n];
    }
    for (int n = 0; n < d_; ++n) kappa_[n] = 0.5 * dt_ * gamma_ * double(n);
  }

  int fock_dim() const { return d_; }
  double dt() const { return dt_; }
  double gamma() const { return gamma_; }

  // dst = (I - i dt H_eff) src.  src and dst must be distinct.
  Moments apply_w0(const Vector& src, Vector& dst) const {
    const Complex* gs = src.data();
    const Complex* es = src.data() + d_;
    Complex* gd = dst.data();
    Complex* ed = dst.data() + d_;
    double tot = 0.0, wgt = 0.0;
    for (int n = 0; n < d_; ++n) {
      Complex og = (1.0 - kappa_[n]) * gs[n];
      Complex oe = (1.0 - kappa_[n]) * es[n];
      Complex hg(0.0, 0.0);  // i/dt times the coupling part, see below
      Complex he(0.0, 0.0);
      if (n > 0) {
        hg += cg_[n] * es[n - 1] + cf_[n] * gs[n - 1];
        he += cf_[n] * es[n - 1];
      }
      if (n + 1 < d_) {
        hg += cf_[n + 1] * gs[n + 1];
        he += cg_[n + 1] * gs[n + 1] + cf_[n + 1] * es[n + 1];
      }
      og += Complex(hg.imag(), -hg.real());  // og -= i * hg
      oe += Complex(he.imag(), -he.real());
      gd[n] = og;
      ed[n] = oe;
      const double w = std::norm(og) + std::norm(oe);
      tot += w;
      wgt += double(n) * w;
    }
    return {tot, wgt};
  }

  // dst = a src (no sqrt(gamma dt) prefactor).  src and dst must be distinct.
  Moments apply_lower(const Vector& src, Vector& dst) const {
    const Complex* gs = src.data();
    const Complex* es = src.data() + d_;
    Complex* gd = dst.data();
    Complex* ed = dst.data() + d_;
    double tot = 0.0, wgt = 0.0;
    for (int n = 0; n < d_; ++n) {
      const Complex og = (n + 1 < d_) ? sq_[n + 1] * gs[n + 1] : Complex(0, 0);
      const Complex oe = (n + 1 < d_) ? sq_[n + 1] * es[n + 1] : Complex(0, 0);
      gd[n] = og;
      ed[n] = oe;
      const double w = std::norm(og) + std::norm(oe);
      tot += w;
      wgt += double(n) * w;
    }
    return {tot, wgt};
  }

  // dst = H_eff src, the full generator including the damping diagonal.
  void apply_heff(const Vector& src, Vector& dst) const {
    const Complex* gs = src.data();
    const Complex* es = src.data() + d_;
    Complex* gd = dst.data();
    Complex* ed = dst.data() + d_;
    for (int n = 0; n < d_; ++n) {
      Complex og = Complex(0.0, -0.5 * gamma_ * double(n)) * gs[n];
      Complex oe = Complex(0.0, -0.5 * gamma_ * double(n)) * es[n];
      if (n > 0) {
        og += g_ * sq_[n] * es[n - 1] + f_ * sq_[n] * gs[n - 1];
        oe += f_ * sq_[n] * es[n - 1];
      }
      if (n + 1 < d_) {
        og += f_ * sq_[n + 1] * gs[n + 1];
        oe += g_ * sq_[n + 1] * gs[n + 1] + f_ * sq_[n + 1] * es[n + 1];
      }
      gd[n] = og;
      ed[n] = oe;
    }
  }

  Moments moments(const Vector& v) const {
    const Complex* gs = v.data();
    const Complex* es = v.data() + d_;
    double tot = 0.0, wgt = 0.0;
    for (int n = 0; n < d_; ++n) {
      const double w = std::norm(gs[n]) + std::norm(es[n]);
      tot += w;
      wgt += double(n) * w;
    }
    return {tot, wgt};
  }

  // Weight sitting in the top two rungs of the ladder (either atom state).
  double top2_weight(const Vector& v) const {
    return std::norm(v(d_ - 1)) + std::norm(v(d_ - 2)) +
           std::norm(v(2 * d_ - 1)) + std::norm(v(2 * d_ - 2));
  }

 private:
  int d_;
  double dt_, g_, f_, gamma_;
  std::vector<double> sq_;     // sqrt(n)
  std::vector<double> cg_;     // dt g sqrt(n)
  std::vector<double> cf_;     // dt F sqrt(n)
  std::vector<double> kappa_;  // dt gamma n / 2
};

// Maps sample times onto step indices (sorted, deduplicated).  Times must
// lie in [0, t_final] up to half a step of slack.
inline std::vector<std::int64_t> snap_steps(std::span<const double> times,
                                            double dt, double t_final) {
  const std::int64_t last = std::llround(t_final / dt);
  std::vector<std::int64_t> out;
  out.reserve(times.size());
  for (double t : times) {
    if (!std::isfinite(t) || t < -0.5 * dt)
      throw InvalidParams("sample time " + std::to_string(t) +
                          " is not a valid time");
    if (t > t_final + 0.5 * dt + 1e-12 * std::max(1.0, t_final))
      throw InvalidParams("sample time " + std::to_string(t) +
                          " exceeds t_final = " + std::to_string(t_final));
    out.push_back(
        std::min(last, static_cast<std::int64_t>(std::llround(t / dt))));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void check_truncation(double top2, double total, double t) {
  if (top2 > 1e-8 * total)
    throw TruncationError(
        "population " + std::to_string(top2 / total) +
        " reached the top two Fock levels at t = " + std::to_string(t) +
        "; increase fock_dim");
}

// Core stochastic loop shared by run_trajectory and the ensemble driver.
// snaps must come from snap_steps.  on_snap(sample_index, t, psi) receives a
// normalized snapshot; on_jump(t, psi) the normalized post-jump state.
//
// The running state is renormalized lazily (only when its tracked squared
// norm has decayed below 0.25), which keeps the hot path at one kernel apply
// per step.  Jump decisions use the tracked moments, so dp1 equals
// gamma dt <n> of the normalized state regardless of the stored scale.
template <class SnapFn, class JumpFn>
void trajectory_scan(const SimParams& rp, std::uint64_t seed,
                     std::span<const std::int64_t> snaps, SnapFn&& on_snap,
                     JumpFn&& on_jump) {
  const StepKernel kernel(rp);
  Vector cur = initial_state(rp).amplitudes();
  Vector nxt(cur.size());
  Vector snap_buf(cur.size());
  TrajectoryRng rng(seed);
  const std::int64_t n_steps = std::llround(rp.t_final / rp.dt);
  StepKernel::Moments m = kernel.moments(cur);

  std::size_t si = 0;
  auto emit_snaps = [&](std::int64_t step) {
    while (si < snaps.size() && snaps[si] == step) {
      snap_buf = cur * (1.0 / std::sqrt(m.total));
      on_snap(si, double(step) * rp.dt, snap_buf);
      ++si;
    }
  };

  emit_snaps(0);
  for (std::int64_t step = 1; step <= n_steps; ++step) {
    const double dp1 = rp.gamma * rp.dt * (m.weighted / m.total);
    const double u = rng.uniform01();
    if (u < dp1) {
      if (m.weighted / m.total < 1e-14)
        throw ZeroNormJump("jump drawn on a photonless state at t = " +
                           std::to_string(double(step) * rp.dt));
      m = kernel.apply_lower(cur, nxt);
      cur.swap(nxt);
      cur *= 1.0 / std::sqrt(m.total);
      m.weighted /= m.total;
      m.total = 1.0;
      on_jump(double(step) * rp.dt, cur);
    } else {
      m = kernel.apply_w0(cur, nxt);
      cur.swap(nxt);
      if (m.total < 0.25) {
        cur *= 1.0 / std::sqrt(m.total);
        m.weighted /= m.total;
        m.total = 1.0;
      }
    }
    check_truncation(kernel.top2_weight(cur), m.total, double(step) * rp.dt);
    emit_snaps(step);
  }
}

}  // namespace detail

// n uniformly spaced times covering [0, t_final] inclusive.
inline std::vector<double> uniform_times(int n, double t_final) {
  if (n < 2) throw InvalidParams("need at least 2 sample points");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = t_final * double(i) / double(n - 1);
  return out;
}

// One application of the no-jump Kraus map.  Returns the *unnormalized*
// state W0 psi and the no-jump probability dp0 = |W0 psi|^2 (for a
// normalized input).
inline std::pair<JointState, double> no_jump_step(const JointState& state,
                                                  const SimParams& params) {
  const SimParams rp = params.resolved();
  if (state.space().fock_dim() != rp.fock_dim)
    throw DimensionMismatch("state and params disagree on fock_dim");
  const detail::StepKernel kernel(rp);
  Vector out(state.amplitudes().size());
  const auto m = kernel.apply_w0(state.amplitudes(), out);
  return {JointState(std::move(out), state.space()), m.total};
}

// One application of the jump Kraus map W1 = sqrt(gamma dt) a.  Returns the
// unnormalized state and dp1 = gamma dt <adag a>.
inline std::pair<JointState, double> jump_step(const JointState& state,
                                               const SimParams& params) {
  const SimParams rp = params.resolved();
  if (state.space().fock_dim() != rp.fock_dim)
    throw DimensionMismatch("state and params disagree on fock_dim");
  const detail::StepKernel kernel(rp);
  const auto m_in = kernel.moments(state.amplitudes());
  if (m_in.weighted < 1e-14)
    throw ZeroNormJump("jump requested on a state with <adag a> = " +
                       std::to_string(m_in.weighted));
  Vector out(state.amplitudes().size());
  kernel.apply_lower(state.amplitudes(), out);
  out *= std::sqrt(rp.gamma * rp.dt);
  return {JointState(std::move(out), state.space()),
          rp.gamma * rp.dt * m_in.weighted};
}

// Draws the measurement record for one step and returns the normalized
// conditional state.
inline StepOutcome sample_step(const JointState& state, const SimParams& params,
                               TrajectoryRng& rng) {
  const SimParams rp = params.resolved();
  if (state.space().fock_dim() != rp.fock_dim)
    throw DimensionMismatch("state and params disagree on fock_dim");
  const detail::StepKernel kernel(rp);
  const auto m_in = kernel.moments(state.amplitudes());
  const double dp1 = rp.gamma * rp.dt * (m_in.weighted / m_in.total);
  const double u = rng.uniform01();
  Vector out(state.amplitudes().size());
  if (u < dp1) {
    kernel.apply_lower(state.amplitudes(), out);
    return {JointState(std::move(out), state.space()).normalized(), true, dp1};
  }
  kernel.apply_w0(state.amplitudes(), out);
  return {JointState(std::move(out), state.space()).normalized(), false, dp1};
}

// Full stochastic unraveling from the drive-balanced initial state.
// Snapshots are taken at sample_times snapped to the step grid.
inline TrajectoryRecord run_trajectory(const SimParams& params,
                                       std::uint64_t seed,
                                       std::span<const double> sample_times) {
  const SimParams rp = params.resolved();
  const auto snaps = detail::snap_steps(sample_times, rp.dt, rp.t_final);
  const SpaceDescriptor space(rp.fock_dim);
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.t_final = double(std::llround(rp.t_final / rp.dt)) * rp.dt;
  rec.times.reserve(snaps.size());
  rec.states.reserve(snaps.size());
  detail::trajectory_scan(
      rp, seed, snaps,
      [&](std::size_t, double t, const Vector& psi) {
        rec.times.push_back(t);
        rec.states.emplace_back(psi, space);
      },
      [&](double t, const Vector& psi) {
        rec.jump_times.push_back(t);
        rec.jump_states.emplace_back(psi, space);
      });
  return rec;
}

// Deterministic no-jump branch (the record conditioned on zero detections),
// sampled at the given times.
inline std::vector<JointState> no_jump_trajectory(
    const SimParams& params, std::span<const double> sample_times) {
  const SimParams rp = params.resolved();
  const auto snaps = detail::snap_steps(sample_times, rp.dt, rp.t_final);
  const detail::StepKernel kernel(rp);
  const SpaceDescriptor space(rp.fock_dim);
  Vector cur = initial_state(rp).amplitudes();
  Vector nxt(cur.size());
  auto m = kernel.moments(cur);
  std::vector<JointState> out;
  out.reserve(snaps.size());
  std::size_t si = 0;
  const std::int64_t n_steps = snaps.empty() ? 0 : snaps.back();
  for (std::int64_t step = 0; step <= n_steps; ++step) {
    if (step > 0) {
      m = kernel.apply_w0(cur, nxt);
      cur.swap(nxt);
      if (m.total < 0.25) {
        cur *= 1.0 / std::sqrt(m.total);
        m.weighted /= m.total;
        m.total = 1.0;
      }
      detail::check_truncation(kernel.top2_weight(cur), m.total,
                               double(step) * rp.dt);
    }
    while (si < snaps.size() && snaps[si] == step) {
      out.emplace_back(Vector(cur * (1.0 / std::sqrt(m.total))), space);
      ++si;
    }
  }
  return out;
}

inline JointState no_jump_trajectory(const SimParams& params, double t) {
  const double times[1] = {t};
  return no_jump_trajectory(params, std::span<const double>(times)).front();
}

// Dense Runge-Kutta 4 integration of
//   drho/dt = -i[H, rho] - (gamma/2){adag a, rho} + gamma a rho adag
// on the same step grid as the stochastic solver.  Deliberately built on
// the dense operators (not the ladder kernel) so the two evolution paths
// stay independent of each other.
inline std::vector<DensityMatrix> master_equation_solve(
    const SimParams& params, std::span<const double> times) {
  const SimParams rp = params.resolved();
  const auto snaps = detail::snap_steps(times, rp.dt, rp.t_final);
  const SpaceDescriptor space(rp.fock_dim);
  const int dim = space.joint_dim();
  const int d = rp.fock_dim;

  const Matrix h = build_hamiltonian(rp).matrix;
  const OperatorSet ops = build_operators(space);
  const Matrix& am = ops.a.matrix;
  const Matrix adm = ops.a.matrix.adjoint();
  Eigen::VectorXd nvec(dim);
  for (int s = 0; s < 2; ++s)
    for (int n = 0; n < d; ++n) nvec(space.index(s, n)) = double(n);

  const Vector psi0 = initial_state(rp).amplitudes();
  Matrix rho = psi0 * psi0.adjoint();

  Matrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim);
  Matrix stage(dim, dim), t1(dim, dim), t2(dim, dim);
  const double dt = rp.dt;
  const double gamma = rp.gamma;

  auto rhs = [&](const Matrix& r, Matrix& out) {
    t1.noalias() = h * r;
    t2.noalias() = r * h;
    out = Complex(0.0, -1.0) * (t1 - t2);
    if (gamma > 0.0) {
      for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i)
          out(i, j) -= 0.5 * gamma * (nvec(i) + nvec(j)) * r(i, j);
      t1.noalias() = am * r;
      t2.noalias() = t1 * adm;
      out.noalias() += gamma * t2;
    }
  };

  std::vector<DensityMatrix> result;
  result.reserve(snaps.size());
  std::size_t si = 0;
  const std::int64_t n_steps = snaps.empty() ? 0 : snaps.back();
  for (std::int64_t step = 0; step <= n_steps; ++step) {
    if (step > 0) {
      rhs(rho, k1);
      stage = rho + (0.5 * dt) * k1;
      rhs(stage, k2);
      stage = rho + (0.5 * dt) * k2;
      rhs(stage, k3);
      stage = rho + dt * k3;
      rhs(stage, k4);
      rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

      const double t = double(step) * rp.dt;
      const double trace_defect = std::abs(rho.trace() - Complex(1.0, 0.0));
      if (trace_defect > 1e-8)
        throw TraceDrift("master equation trace drifted by " +
                         std::to_string(trace_defect) + " at t = " +
                         std::to_string(t));
      const double top2 = rho(space.index(0, d - 1), space.index(0, d - 1)).real() +
                          rho(space.index(1, d - 1), space.index(1, d - 1)).real() +
                          rho(space.index(0, d - 2), space.index(0, d - 2)).real() +
                          rho(space.index(1, d - 2), space.index(1, d - 2)).real();
      detail::check_truncation(top2, 1.0, t);
    }
    while (si < snaps.size() && snaps[si] == step) {
      result.emplace_back(rho, Subsystem::joint);
      ++si;
    }
  }
  return result;
}

inline DensityMatrix master_equation_evolve(const SimParams& params, double t) {
  const double times[1] = {t};
  return master_equation_solve(params, std::span<const double>(times)).front();
}

}  // namespace qtraj
