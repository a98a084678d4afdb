#pragma once

#include <cmath>
#include <compare>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace rydgate::atom {

// Half-integer quantum number stored as twice its value.
struct HalfInt {
  int twice = 0;

  static constexpr HalfInt half(int twice_value) { return HalfInt{twice_value}; }
  static constexpr HalfInt whole(int value) { return HalfInt{2 * value}; }
  constexpr double value() const { return 0.5 * twice; }

  friend constexpr auto operator<=>(HalfInt, HalfInt) = default;
};

std::string to_string(HalfInt h);

// Rydberg-Ritz coefficients: delta(n) = delta0 + delta2 / (n - delta0)^2.
struct QuantumDefect {
  double delta0 = 0.0;
  double delta2 = 0.0;
};

struct Species {
  std::string name;
  double mass = 0.0;               // kg
  double rydberg_constant = 0.0;   // 1/m, reduced-mass corrected
  double core_polarizability = 0.0;  // atomic units; sets the Numerov core cutoff
  std::map<std::pair<int, int>, QuantumDefect> defects;  // keyed by (l, 2j)

  // Throws ConfigError naming the series when (l, j) is not tabulated.
  double quantum_defect(int n, int l, HalfInt j) const;
  bool is_hydrogenic(int l, HalfInt j) const;

  // Checks the documented invariants; throws ConfigError.
  void validate() const;
};

using SpeciesPtr = std::shared_ptr<const Species>;

// Species data file (JSON). See docs/species_data.md.
class SpeciesTable {
 public:
  static SpeciesTable load(const std::filesystem::path& path);
  static SpeciesTable from_json_text(const std::string& text);

  SpeciesPtr get(const std::string& name) const;
  const std::string& version() const { return version_; }
  std::vector<std::string> names() const;

 private:
  std::string version_;
  std::map<std::string, SpeciesPtr> species_;
};

struct RydbergLevel {
  SpeciesPtr species;
  int n = 0;
  int l = 0;
  HalfInt j;
  HalfInt mj;

  // Throws DomainError on |mj| > j, j not in {l-1/2, l+1/2}, n <= l.
  void validate() const;
  std::string label() const;  // e.g. "Rb87 79D5/2 mj=5/2"

  friend bool operator==(const RydbergLevel& a, const RydbergLevel& b);
  friend std::strong_ordering operator<=>(const RydbergLevel& a, const RydbergLevel& b);
};

// Quantization axis is fixed to the lab y direction.
struct FieldConfig {
  double magnetic_field_gauss = 0.0;
  double axis[3] = {0.0, 1.0, 0.0};

  void validate() const;
};

double effective_principal_number(const RydbergLevel& level);

// Energy relative to the ionization threshold, J. Negative.
double level_energy(const RydbergLevel& level);

// u(r) = r R(r) sampled on a square-root grid r_i = (i h)^2 (atomic units).
struct RadialWavefunction {
  double step = 0.0;          // grid spacing in sqrt(a0)
  std::size_t first_index = 0;  // x_i = (first_index + k) * step
  std::vector<double> reduced;  // X(x) with u(r) = sqrt(x) X(x)

  std::size_t size() const { return reduced.size(); }
  double x(std::size_t k) const { return static_cast<double>(first_index + k) * step; }
  double r(std::size_t k) const { return x(k) * x(k); }                     // a0
  double u(std::size_t k) const { return std::sqrt(x(k)) * reduced[k]; }    // a0^-1/2
  double inner_radius() const { return r(0); }
  double outer_radius() const { return r(size() - 1); }
  double norm() const;  // integral of u^2 dr
};

inline constexpr double kDefaultRadialStep = 0.005;

// Numerov integration of the Coulomb radial equation at the quantum-defect
// energy, inward from r = 2n(n+15) a0. Non-hydrogenic series stop at the larger
// of the inner classical turning point and alpha_c^(1/3); hydrogenic series
// continue towards the origin until the solution would diverge.
RadialWavefunction radial_wavefunction(const Species& species, int n, int l, HalfInt j,
                                       double step = kDefaultRadialStep);
RadialWavefunction radial_wavefunction(const RydbergLevel& level);

// <a| r |b> in metres. Memoized per (species, n, l, j) pair; thread-safe.
double radial_matrix_element(const RydbergLevel& a, const RydbergLevel& b);

// <l_b j_b m_b| C^1_q |l_a j_a m_a> for a single electron with s = 1/2.
double angular_dipole_factor(int l_a, HalfInt j_a, HalfInt m_a, int l_b, HalfInt j_b,
                             HalfInt m_b, int q);

// <b| d_q |a> in C m. Exactly zero unless |l_a - l_b| = 1, m_b = m_a + q and
// |j_a - j_b| <= 1.
double dipole_matrix_element(const RydbergLevel& a, const RydbergLevel& b, int q);

double lande_g(int l, HalfInt j);

// g_j mu_B m_j B, J.
double zeeman_shift(const RydbergLevel& level, const FieldConfig& field);

}  // namespace rydgate::atom
