#pragma once

#include <stdexcept>
#include <string>

namespace qtraj {

// Bad or inconsistent user-supplied parameters (CLI maps this to exit code 2).
struct InvalidParams : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Objects from incompatible Hilbert spaces were combined.
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Population reached the top of the Fock ladder; results past this point would
// be unreliable.  CLI maps this to exit code 3.
struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A jump was requested on a state with no photons to emit.
struct ZeroNormJump : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The master-equation integrator lost probability beyond tolerance.
struct TraceDrift : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A query time does not lie on the recorded sample grid.
struct TimeNotSampled : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace qtraj
