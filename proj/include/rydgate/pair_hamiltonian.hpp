#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydgate/atom_structure.hpp"

namespace rydgate::pair {

using atom::HalfInt;
using atom::RydbergLevel;

// (n, l, j) without the magnetic quantum number.
struct LevelFamily {
  int n = 0;
  int l = 0;
  HalfInt j;

  friend auto operator<=>(const LevelFamily&, const LevelFamily&) = default;
};

std::string to_string(const LevelFamily& f);

// A pair of level families for the two distinguishable atoms. The basis
// builder adds both orderings.
struct FoersterChannel {
  LevelFamily first;
  LevelFamily second;

  friend auto operator<=>(const FoersterChannel&, const FoersterChannel&) = default;
};

// The three manifolds coupled to (79d5/2, 79d5/2): (80p3/2, 78f), (81p3/2, 77f)
// with both f fine-structure components.
std::vector<FoersterChannel> default_channels();

struct PairState {
  RydbergLevel atom1;  // control atom (Rb87)
  RydbergLevel atom2;  // target atom (Rb85)

  std::string label() const;
  friend bool operator==(const PairState&, const PairState&) = default;
};

// Species of the two atoms and the reference Rydberg level |r>.
struct PairSetup {
  atom::SpeciesPtr atom1;
  atom::SpeciesPtr atom2;
  LevelFamily rydberg{79, 2, HalfInt{5}};
  HalfInt rydberg_mj{5};
};

// Foerster pair states plus one extra element |r,up> (atom1 in |r>, atom2 in
// its ground qubit state), stored last.
struct PairBasis {
  std::vector<PairState> states;
  std::vector<FoersterChannel> channels;  // deduplicated input channels
  PairSetup setup;
  std::size_t reference_index = 0;  // |rr>

  std::size_t bystander_index() const { return states.size(); }
  std::size_t dimension() const { return states.size() + 1; }
  std::size_t foerster_size() const { return states.size(); }
  std::string label(std::size_t index) const;
};

// Enumerates every m_j combination of each channel in both orderings,
// removing duplicates. Throws InvalidInput on an empty channel list or when
// |rr> is not contained in any channel.
PairBasis build_pair_basis(const std::vector<FoersterChannel>& channels, const PairSetup& setup);

// Atoms at separation z along lab z with relative offset y along lab y (the
// quantization axis). The azimuth of R is fixed to 0.
struct Geometry {
  double z = 0.0;  // m
  double y = 0.0;  // m

  void validate() const;
  double separation() const;  // R
  double cos_theta() const;   // angle between R and the quantization axis
  double theta() const;
  double phi() const { return 0.0; }
  Geometry scaled(double s) const { return Geometry{z * s, y * s}; }
};

// Hermitian matrix in angular-frequency units (rad/s) with provenance.
struct InteractionMatrix {
  Eigen::MatrixXcd matrix;
  Geometry geometry;
  double field_gauss = 0.0;
  std::vector<FoersterChannel> channels;

  std::size_t dimension() const { return static_cast<std::size_t>(matrix.rows()); }
  // max |H - H^dagger| / max |H|
  double hermiticity_defect() const;
};

// Angular weights w(q1, q2) such that
//   d1.d2 - 3 (d1.R)(d2.R) = sum_{q1,q2} w(q1,q2) d1_{q1} d2_{q2},
// from the rank-2 spherical-tensor expansion. Indexed [q1 + 1][q2 + 1].
std::array<std::array<std::complex<double>, 3>, 3> dipole_dipole_weights(double theta, double phi);

// <s1| V_dd |s2> in J.
std::complex<double> dipole_dipole_element(const PairState& s1, const PairState& s2, const Geometry& g);

// Precomputes single-atom dipole tables and the five rank-2 coupling matrices
// once per basis; H_F for any geometry and field is then a weighted sum.
class FoersterModel {
 public:
  explicit FoersterModel(PairBasis basis);

  const PairBasis& basis() const { return basis_; }

  // Diagonal: pair energy relative to 2 E(79d5/2) at zero field, plus both
  // Zeeman shifts. Off-diagonal: dipole-dipole coupling. |r,up> row/column
  // is zero.
  InteractionMatrix hamiltonian(const Geometry& g, const atom::FieldConfig& field) const;

 private:
  PairBasis basis_;
  Eigen::VectorXd defects_;        // rad/s
  Eigen::VectorXd zeeman_per_gauss_;  // rad/s per gauss
  // rank-2 components mu = -2..2 of the coupling in rad/s * m^3, without Y_2mu
  std::array<Eigen::MatrixXd, 5> rank2_;
};

InteractionMatrix build_foerster_hamiltonian(const PairBasis& basis, const Geometry& g,
                                             const atom::FieldConfig& field);

// W couples |r,up> <-> |rr> with Omega85 / 2 (rad/s). Omega85 = 0 gives W = 0.
InteractionMatrix build_excitation_coupling(const PairBasis& basis, double omega85);

// H = H_F + W with the two-photon laser tuned to the non-interacting |rr>
// line: the |r,up> diagonal is set to H_F(rr, rr), so only the interaction
// detunes the second excitation.
Eigen::MatrixXcd blockade_hamiltonian(const PairBasis& basis, const InteractionMatrix& foerster,
                                      const InteractionMatrix& coupling);

// Spectral decomposition of H projected on one initial state.
class SurvivalSpectrum {
 public:
  SurvivalSpectrum(const Eigen::MatrixXcd& hamiltonian, std::size_t initial_index);

  // 1 - |<i| exp(-iHt) |i>|^2
  double excitation_probability(double t) const;
  // Mean over n uniform samples of [0, window].
  double time_average(double window, std::size_t n_samples) const;
  // 1 - sum_groups (sum_k |<i|v_k>|^2)^2, degenerate eigenvalues grouped.
  double infinite_time_average() const;
  // Full evolved state, for unitarity checks.
  Eigen::VectorXcd evolve(double t) const;

  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXcd eigenvectors_;
  std::size_t initial_ = 0;
};

double double_excitation_probability(const Eigen::MatrixXcd& hamiltonian, std::size_t initial_index, double t);

struct TimeAverageOptions {
  double window_rabi_periods = 100.0;
  std::size_t samples = 1000;
};

// Throws DomainError unless window > 0 and n_samples >= 100.
double time_averaged_probability(const Eigen::MatrixXcd& hamiltonian, std::size_t initial_index, double window,
                                 std::size_t n_samples);

// hbar Omega sqrt(1/P - 1), J. Throws DomainError unless 0 < P <= 1.
double blockade_shift(double p85, double omega85);
// Inverse relation P = (hbar Omega)^2 / ((hbar Omega)^2 + dE^2).
double probability_from_shift(double shift, double omega85);

struct BlockadePoint {
  double y = 0.0;              // m
  double p85 = 0.0;            // finite-window time average
  double p85_closed_form = 0.0;  // infinite-time spectral average
  double shift = 0.0;          // J
};

struct BlockadeScan {
  std::vector<BlockadePoint> points;
  std::size_t basis_size = 0;
  bool shift_decreasing_tail = true;  // soft diagnostic for y >> z
};

// Per-point evaluation of P85(y) and dE(y) over a sorted, non-negative grid.
BlockadeScan blockade_scan(const FoersterModel& model, double z, const std::vector<double>& y_grid,
                           const atom::FieldConfig& field, double omega85, const TimeAverageOptions& options = {},
                           unsigned jobs = 1);

}  // namespace rydgate::pair
