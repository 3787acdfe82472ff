#pragma once

// Monte Carlo wavefunction toolkit for a driven, damped two-level atom in a
// leaky cavity: stochastic unravelings, ensemble reconstruction, a dense
// master-equation reference integrator, and the observables connecting the
// quantum and semiclassical pictures.

#include "qtraj/errors.hpp"
#include "qtraj/rng.hpp"
#include "qtraj/params.hpp"
#include "qtraj/hilbert.hpp"
#include "qtraj/dynamics.hpp"
#include "qtraj/observables.hpp"
#include "qtraj/ensemble.hpp"
#include "qtraj/experiment.hpp"
