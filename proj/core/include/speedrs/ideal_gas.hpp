#pragma once

#include <cstdint>
#include <vector>

#include "speedrs/model_spec.hpp"
#include "speedrs/path.hpp"

namespace speedrs {

struct SimGrid;

/// Hard spheres of unit mass in the cube [0, V^(1/3)]^3 with radius
/// 0.35 (V/n)^(1/3). Units have k_B = 1, so each velocity component starts
/// N(0, temperature). Integration uses fixed sub-steps: free flight, then
/// specular wall reflection, then elastic resolution of every approaching
/// overlapping pair.
struct GasTrajectory {
  PathBundle positions;               // one 3-d path per particle
  std::vector<double> kinetic_energy;  // total, at each grid time
  std::vector<double> initial_speed_sq;
  double box_length = 0.0;
  double radius = 0.0;
};

/// Throws PackingTooDense when overlap-free placement fails.
GasTrajectory simulate_ideal_gas_full(const IdealGasSpec& spec, const SimGrid& grid, std::uint64_t seed);
PathBundle simulate_ideal_gas(const IdealGasSpec& spec, const SimGrid& grid, std::uint64_t seed);

}  // namespace speedrs
