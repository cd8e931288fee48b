#pragma once

namespace cavchar::constants {

// 2019 SI exact values.
inline constexpr double planck_h = 6.62607015e-34;        // J s
inline constexpr double boltzmann_k = 1.380649e-23;       // J / K
inline constexpr double hbar = 1.054571817e-34;           // J s, h / 2 pi rounded

// Niobium bulk density used for etch-depth estimates.
inline constexpr double niobium_density_kg_m3 = 8570.0;

} // namespace cavchar::constants
