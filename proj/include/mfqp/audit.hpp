#pragma once

#include "mfqp/cost.hpp"
#include "mfqp/rng.hpp"

namespace mfqp {

// Full-support start and a few segments whose fluxes drain at most a quarter of each state.
FluxTrajectory random_flux_trajectory(EdgeKind kind, int z_max, Philox4x32& rng, double max_duration = 2.0);

// Random law on {0..z_max} with support in {0..12}, pulled toward delta_0 until theta <= M.
StateDistribution random_in_KM(int z_max, double M, Philox4x32& rng);

}  // namespace mfqp
