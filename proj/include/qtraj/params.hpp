#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "qtraj/errors.hpp"

namespace qtraj {

// Model parameters in units of the coupling (g = 1 is the conventional
// choice; hbar = 1 throughout).
//
//   g      atom-field coupling
//   F      coherent drive amplitude
//   gamma  cavity decay rate
//
// dt = 0 requests the default step: small enough that every rate in the
// problem is resolved, dt = min(1e-3 / g, 1e-2 / gamma, 1e-2 / F) over the
// nonzero rates.  Explicit dt must keep dt * max(g, F, gamma) <= 0.05.
struct SimParams {
  double g = 1.0;
  double F = 0.0;
  double gamma = 0.0;
  int fock_dim = 16;
  double dt = 0.0;
  double t_final = 0.0;
  std::optional<std::complex<double>> alpha_override;

  // Returns a copy with dt filled in and every constraint checked.
  SimParams resolved() const {
    SimParams p = *this;
    auto bad = [](const std::string& what) { throw InvalidParams(what); };
    if (!(std::isfinite(p.g) && p.g >= 0.0)) bad("g must be finite and >= 0");
    if (!(std::isfinite(p.F) && p.F >= 0.0)) bad("F must be finite and >= 0");
    if (!(std::isfinite(p.gamma) && p.gamma >= 0.0))
      bad("gamma must be finite and >= 0");
    if (!(std::isfinite(p.t_final) && p.t_final >= 0.0))
      bad("t_final must be finite and >= 0");
    if (p.fock_dim < 2) bad("fock_dim must be >= 2");
    if (!std::isfinite(p.dt) || p.dt < 0.0) bad("dt must be finite and >= 0");
    if (p.dt == 0.0) {
      double dt = 1e300;
      if (p.g > 0.0) dt = std::min(dt, 1e-3 / p.g);
      if (p.gamma > 0.0) dt = std::min(dt, 1e-2 / p.gamma);
      if (p.F > 0.0) dt = std::min(dt, 1e-2 / p.F);
      p.dt = (dt < 1e300) ? dt : 1e-3;
    }
    const double max_rate = std::max({p.g, p.F, p.gamma});
    // Slack of one ulp-ish so dt = 0.05 / max_rate exactly passes.
    if (p.dt * max_rate > 0.05 * (1.0 + 1e-12))
      bad("dt too coarse: dt * max(g, F, gamma) = " +
          std::to_string(p.dt * max_rate) + " exceeds 0.05");
    return p;
  }

  // Drive-balanced field amplitude 2F / (i gamma); the field the cavity
  // relaxes to when g = 0.
  std::complex<double> steady_alpha() const {
    if (alpha_override) return *alpha_override;
    if (gamma <= 0.0)
      throw InvalidParams(
          "initial coherent amplitude 2F/(i gamma) undefined at gamma = 0; "
          "supply alpha_override");
    return std::complex<double>(0.0, -2.0 * F / gamma);
  }
};

}  // namespace qtraj
