#pragma once

#include <numbers>

// CODATA 2018 values, SI units.
namespace rydgate::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double planck = 6.62607015e-34;              // J s
inline constexpr double hbar = planck / two_pi;               // J s
inline constexpr double speed_of_light = 299792458.0;         // m/s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double boltzmann = 1.380649e-23;             // J/K
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double bohr_radius = 5.29177210903e-11;      // m
inline constexpr double electron_mass = 9.1093837015e-31;     // kg
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double bohr_magneton = 9.2740100783e-24;     // J/T
inline constexpr double rydberg_infinity = 10973731.568160;   // 1/m
inline constexpr double electron_g_factor = 2.0;              // Lande factors use g_s = 2

inline constexpr double gauss = 1e-4;  // T
inline constexpr double micro = 1e-6;
inline constexpr double nano = 1e-9;
inline constexpr double mega = 1e6;

}  // namespace rydgate::constants
