#pragma once

#include <string>

#include "rydgate/atom_structure.hpp"
#include "rydgate/constants.hpp"
#include "rydgate/thermal_ensemble.hpp"

namespace rydgate::test {

inline const atom::SpeciesTable& rubidium() {
  static const atom::SpeciesTable table = atom::SpeciesTable::load(std::string(RYDGATE_DATA_DIR) + "/rubidium.json");
  return table;
}

inline const atom::SpeciesTable& hydrogen() {
  static const atom::SpeciesTable table = atom::SpeciesTable::load(std::string(RYDGATE_DATA_DIR) + "/hydrogen.json");
  return table;
}

inline atom::RydbergLevel level(const atom::SpeciesPtr& sp, int n, int l, int j2, int mj2) {
  return atom::RydbergLevel{sp, n, l, atom::HalfInt{j2}, atom::HalfInt{mj2}};
}

inline const pair::FoersterModel& rubidium_pair_model() {
  static const pair::FoersterModel model(
      pair::build_pair_basis(pair::default_channels(), pair::PairSetup{rubidium().get("Rb87"), rubidium().get("Rb85")}));
  return model;
}

inline constexpr double kOmega85 = constants::two_pi * 0.6e6;

// P85(y) for z = 3.8 um on [0, 30 um], tabulated once per field value.
inline const thermal::P85Curve& reference_p85_curve(double field_gauss) {
  static const thermal::P85Curve b3 =
      thermal::tabulate_p85(rubidium_pair_model(), 3.8e-6, 30e-6, 61, atom::FieldConfig{3.0}, kOmega85);
  static const thermal::P85Curve b0 =
      thermal::tabulate_p85(rubidium_pair_model(), 3.8e-6, 30e-6, 61, atom::FieldConfig{0.0}, kOmega85);
  return field_gauss == 0.0 ? b0 : b3;
}

inline thermal::OffsetDistribution reference_offsets() {
  const double uK = 1e-6;
  return thermal::OffsetDistribution::from(
      thermal::ThermalState{8 * uK, 9 * uK, rubidium().get("Rb87")->mass, rubidium().get("Rb85")->mass},
      thermal::TrapParams{constants::two_pi * 1.39e3, constants::two_pi * 16.9e3});
}

}  // namespace rydgate::test
