#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qtraj/dynamics.hpp"
#include "qtraj/observables.hpp"

namespace qtraj {

namespace detail {

// Compensated (Kahan) accumulator.  The running compensation makes the
// final value independent of how many addends each worker saw, up to a far
// smaller residual than plain summation.
template <typename T>
struct KahanSum {
  T sum{};
  T comp{};

  void add(T v) {
    const T y = v - comp;
    const T t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }

  // Folds another accumulator in; its state is (sum, pending correction).
  void merge(const KahanSum& other) {
    add(other.sum);
    add(-other.comp);
  }

  T value() const { return sum; }
};

}  // namespace detail

// Reconstruction of the unconditioned evolution from n_traj unravelings.
// All vectors are indexed by sample_times.  mean_density holds the joint
// trajectory average (1/T) sum |psi><psi|.
struct EnsembleResult {
  SimParams params;  // resolved copy actually used
  std::int64_t n_traj = 0;
  std::uint64_t base_seed = 0;
  std::vector<double> sample_times;
  std::vector<DensityMatrix> mean_density;
  std::vector<double> mean_entropy;
  std::vector<double> sem_entropy;
  std::vector<double> mean_jump_count;
  std::vector<double> sem_jump_count;
};

namespace detail {

// Trajectories are dealt onto a fixed number of accumulation stripes by
// index (stripe = index mod kStripes), and stripes are merged in stripe
// order.  Workers only ever race for *which* stripe to process next, never
// for data, so results are bit-identical for any worker count.
inline constexpr int kEnsembleStripes = 16;

struct StripeAccumulator {
  // Packed lower triangle (column major) of the running sum of |psi><psi|,
  // one per sample time.
  std::vector<std::vector<KahanSum<Complex>>> density;
  std::vector<KahanSum<double>> ent, ent2, jumps, jumps2;

  void init(std::size_t n_times, std::size_t packed_len) {
    density.assign(n_times, std::vector<KahanSum<Complex>>(packed_len));
    ent.assign(n_times, {});
    ent2.assign(n_times, {});
    jumps.assign(n_times, {});
    jumps2.assign(n_times, {});
  }

  void add_snapshot(std::size_t ti, const Vector& psi, double jump_count,
                    int dim) {
    auto& dens = density[ti];
    const Complex* p = psi.data();
    std::size_t idx = 0;
    for (int j = 0; j < dim; ++j) {
      const Complex cj = std::conj(p[j]);
      for (int i = j; i < dim; ++i) dens[idx++].add(p[i] * cj);
    }
    const double e = entropy_from_amplitudes(psi, dim / 2);
    ent[ti].add(e);
    ent2[ti].add(e * e);
    jumps[ti].add(jump_count);
    jumps2[ti].add(jump_count * jump_count);
  }

  void merge(const StripeAccumulator& o) {
    for (std::size_t t = 0; t < density.size(); ++t) {
      for (std::size_t k = 0; k < density[t].size(); ++k)
        density[t][k].merge(o.density[t][k]);
      ent[t].merge(o.ent[t]);
      ent2[t].merge(o.ent2[t]);
      jumps[t].merge(o.jumps[t]);
      jumps2[t].merge(o.jumps2[t]);
    }
  }
};

}  // namespace detail

// Runs n_traj independent unravelings with per-trajectory seeds
// mix_seed(base_seed, index) and averages them.  n_workers = 0 picks the
// hardware count; the result does not depend on it.
inline EnsembleResult run_ensemble(const SimParams& params,
                                   std::int64_t n_traj,
                                   std::uint64_t base_seed,
                                   std::span<const double> sample_times,
                                   int n_workers = 0) {
  const SimParams rp = params.resolved();
  if (n_traj < 1) throw InvalidParams("n_traj must be >= 1");
  const auto snaps = detail::snap_steps(sample_times, rp.dt, rp.t_final);
  if (snaps.empty()) throw InvalidParams("need at least one sample time");
  const SpaceDescriptor space(rp.fock_dim);
  const int dim = space.joint_dim();
  const std::size_t packed_len = std::size_t(dim) * (dim + 1) / 2;
  const int stripes = detail::kEnsembleStripes;

  if (n_workers == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    n_workers = int(hw ? hw : 1);
  }
  n_workers = std::clamp(n_workers, 1, stripes);

  std::vector<detail::StripeAccumulator> acc(stripes);
  for (auto& a : acc) a.init(snaps.size(), packed_len);
  std::vector<std::exception_ptr> errors(stripes);

  std::atomic<int> next_stripe{0};
  auto work = [&]() {
    for (int s = next_stripe.fetch_add(1); s < stripes;
         s = next_stripe.fetch_add(1)) {
      try {
        for (std::int64_t idx = s; idx < n_traj; idx += stripes) {
          std::int64_t jump_counter = 0;
          detail::trajectory_scan(
              rp, mix_seed(base_seed, std::uint64_t(idx)), snaps,
              [&](std::size_t ti, double, const Vector& psi) {
                acc[s].add_snapshot(ti, psi, double(jump_counter), dim);
              },
              [&](double, const Vector&) { ++jump_counter; });
        }
      } catch (...) {
        errors[s] = std::current_exception();
        return;  // one bad stripe is enough to abort the run
      }
    }
  };

  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (int s = 0; s < stripes; ++s)
    if (errors[s]) std::rethrow_exception(errors[s]);

  for (int s = 1; s < stripes; ++s) acc[0].merge(acc[s]);
  const detail::StripeAccumulator& total = acc[0];

  EnsembleResult res;
  res.params = rp;
  res.n_traj = n_traj;
  res.base_seed = base_seed;
  res.sample_times.reserve(snaps.size());
  for (auto sidx : snaps) res.sample_times.push_back(double(sidx) * rp.dt);

  const double inv_t = 1.0 / double(n_traj);
  auto sem = [&](double s1, double s2) {
    if (n_traj < 2) return 0.0;
    const double var =
        std::max(0.0, (s2 - s1 * s1 * inv_t) / double(n_traj - 1));
    return std::sqrt(var * inv_t);
  };

  for (std::size_t t = 0; t < snaps.size(); ++t) {
    Matrix m(dim, dim);
    std::size_t idx = 0;
    for (int j = 0; j < dim; ++j) {
      for (int i = j; i < dim; ++i) {
        const Complex v = total.density[t][idx++].value() * inv_t;
        m(i, j) = v;
        m(j, i) = std::conj(v);
      }
    }
    res.mean_density.emplace_back(std::move(m), Subsystem::joint);
    const double e1 = total.ent[t].value();
    const double j1 = total.jumps[t].value();
    res.mean_entropy.push_back(e1 * inv_t);
    res.sem_entropy.push_back(sem(e1, total.ent2[t].value()));
    res.mean_jump_count.push_back(j1 * inv_t);
    res.sem_jump_count.push_back(sem(j1, total.jumps2[t].value()));
  }
  return res;
}

// Mean trajectory entropy at a recorded sample time.
inline double average_entropy(const EnsembleResult& result, double t) {
  const double tol = std::max(0.5 * result.params.dt, 1e-12);
  for (std::size_t i = 0; i < result.sample_times.size(); ++i)
    if (std::abs(result.sample_times[i] - t) <= tol)
      return result.mean_entropy[i];
  throw TimeNotSampled("t = " + std::to_string(t) +
                       " is not on the sample grid");
}

// (1/2) tr |A - B|.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.label() != b.label() || a.dim() != b.dim())
    throw DimensionMismatch("trace_distance needs matching density matrices");
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix() - b.matrix(),
                                           Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// How well the reconstruction matches the master equation, plus the Monte
// Carlo error bars of the scalar series.
struct ConvergenceReport {
  std::vector<double> trace_distances;
  double max_trace_distance = 0.0;
  double max_sem_entropy = 0.0;
  double max_sem_jump_count = 0.0;
};

inline ConvergenceReport convergence_report(const EnsembleResult& result) {
  ConvergenceReport rep;
  const auto oracle =
      master_equation_solve(result.params, result.sample_times);
  rep.trace_distances.reserve(oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    rep.trace_distances.push_back(
        trace_distance(result.mean_density[i], oracle[i]));
    rep.max_trace_distance =
        std::max(rep.max_trace_distance, rep.trace_distances.back());
  }
  for (double s : result.sem_entropy)
    rep.max_sem_entropy = std::max(rep.max_sem_entropy, s);
  for (double s : result.sem_jump_count)
    rep.max_sem_jump_count = std::max(rep.max_sem_jump_count, s);
  return rep;
}

// Detector statistics behind the entropy leap: how often the counter has
// fired by t_star and how much entanglement one click erases there.
struct LeapAnalysis {
  double gamma = 0.0;
  double t_star = 0.0;
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  double delta_e = 0.0;
  double mean_jump_count = 0.0;
  double e_leak = 0.0;
};

inline LeapAnalysis leaked_information(const SimParams& params, double t_star,
                                       std::int64_t ensemble_size,
                                       std::uint64_t seed) {
  if (ensemble_size < 100)
    throw InvalidParams("ensemble_size must be >= 100 for stable means");
  const SimParams rp = params.resolved();
  const EntanglementLeap leap = entanglement_leap(rp, t_star);
  SimParams ep = rp;
  ep.t_final = t_star;
  const double times[1] = {t_star};
  const EnsembleResult res = run_ensemble(
      ep, ensemble_size, seed, std::span<const double>(times));
  LeapAnalysis out;
  out.gamma = rp.gamma;
  out.t_star = res.sample_times.back();
  out.entropy_before = leap.entropy_before;
  out.entropy_after = leap.entropy_after;
  out.delta_e = leap.delta_e;
  out.mean_jump_count = res.mean_jump_count.back();
  out.e_leak = out.mean_jump_count * out.delta_e;
  return out;
}

}  // namespace qtraj
