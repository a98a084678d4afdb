#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "rydgate/gate_dynamics.hpp"
#include "rydgate/pair_hamiltonian.hpp"
#include "rydgate/thermal_ensemble.hpp"

namespace rydgate::cli {

// Subset of TOML: [table] and [a.b] headers, key = value with numbers,
// booleans, basic strings and flat arrays (may span lines), '#' comments.
struct TomlValue {
  std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>> value;
  int line = 0;
};

class TomlDocument {
 public:
  static TomlDocument parse(const std::string& text, const std::string& origin = "<config>");
  static TomlDocument load(const std::filesystem::path& path);

  const std::map<std::string, TomlValue>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }
  // Sorted key = value lines with round-trip number formatting.
  std::string canonical() const;

 private:
  std::map<std::string, TomlValue> entries_;
  std::string origin_;
};

std::uint64_t fnv1a64(const std::string& text);

enum class SimulationMode { exact, sampled };
enum class BlockadeMode { thermal, perfect, none, fixed };

struct RunConfig {
  std::filesystem::path source;
  std::string config_hash;  // hex FNV-1a of the canonical form
  std::string canonical;

  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::filesystem::path output_dir = ".";

  std::filesystem::path species_data;
  std::string control = "Rb87";
  std::string target = "Rb85";
  pair::LevelFamily rydberg{79, 2, atom::HalfInt{5}};
  atom::HalfInt rydberg_mj{5};
  std::vector<pair::FoersterChannel> channels;

  double z = 3.8e-6;
  std::vector<double> y_grid;
  double field_gauss = 3.0;
  thermal::TrapParams trap;

  double t87 = 8e-6;
  double t85 = 9e-6;
  std::vector<double> temperature_sweep;
  std::size_t thermal_nodes = 64;
  std::size_t p85_points = 61;
  double p85_y_max = 30e-6;

  double omega85 = 0.0;  // rad/s, blockade calculation
  pair::TimeAverageOptions time_average;

  gate::RabiFrequencies rabi;
  gate::ErrorModel error_model;  // blockade nodes filled in at run time
  BlockadeMode blockade = BlockadeMode::thermal;
  double fixed_shift = 0.0;  // J
  std::size_t blockade_nodes = 32;
  std::size_t doppler_mc_samples = 1000000;

  SimulationMode mode = SimulationMode::exact;
  std::size_t shots = 150;
  gate::ExactOptions exact;

  std::size_t cnot_phase_points = 25;
  std::size_t entangle_phi_points = 25;
  double demo_t_max = 4e-6;
  std::size_t demo_points = 41;

  double f_cnot_reference = 0.73;
};

// Validates the schema (unknown keys, types, ranges) before building the
// configuration. Throws ConfigError.
RunConfig build_run_config(const TomlDocument& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// "80p3/2 78f7/2" -> channel. Throws ConfigError.
pair::FoersterChannel parse_channel(const std::string& text);

}  // namespace rydgate::cli
