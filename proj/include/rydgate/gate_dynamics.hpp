#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rydgate/thermal_ensemble.hpp"

namespace rydgate::gate {

// Conventions used throughout this module:
//  - per-atom levels: 0 = lower qubit state (|down>, |Down>), 1 = upper qubit
//    state (|up>, |Up>), 2 = Rydberg |r>;
//  - product index = 3 * level87 + level85;
//  - a pulse with area theta and phase phi on the pair (a, b) of levels acts
//    as exp(i theta/2 (cos phi sx + sin phi sy)), so R(pi/2, 0)|b> =
//    (|b> + i|a>)/sqrt(2); Raman pulses drive (0, 1), Rydberg pulses (1, 2);
//  - a detuning shifts the energy of the upper level of the driven pair.
enum class Atom { rb87, rb85 };
enum class Transition { raman, rydberg };

inline constexpr int kLower = 0;
inline constexpr int kUpper = 1;
inline constexpr int kRydberg = 2;

std::string to_string(Atom a);
std::string to_string(Transition t);

class TwoAtomState {
 public:
  using Vector = Eigen::Matrix<std::complex<double>, 9, 1>;

  TwoAtomState() { amp_.setZero(); amp_[0] = 1.0; }
  explicit TwoAtomState(const Vector& v) : amp_(v) {}
  static TwoAtomState basis(int level87, int level85);
  static std::size_t index(int level87, int level85) { return static_cast<std::size_t>(3 * level87 + level85); }

  std::complex<double>& operator[](std::size_t i) { return amp_[static_cast<Eigen::Index>(i)]; }
  std::complex<double> operator[](std::size_t i) const { return amp_[static_cast<Eigen::Index>(i)]; }
  const Vector& amplitudes() const { return amp_; }
  double norm_squared() const { return amp_.squaredNorm(); }
  double population(int level87, int level85) const { return std::norm(amp_[static_cast<Eigen::Index>(index(level87, level85))]); }

 private:
  Vector amp_;
};

struct PulseSpec {
  Atom atom = Atom::rb87;
  Transition kind = Transition::raman;
  double area = 0.0;       // rad
  double phase = 0.0;      // rad
  double detuning = 0.0;   // rad/s
  double duration = 0.0;   // s; 0 derives it from area and the Rabi frequency

  void validate() const;
};

struct Wait {
  double duration = 0.0;  // s
};

// Stochastic Doppler phase on the control atom's Rydberg amplitude, taken
// from the error model's Doppler settings.
struct DopplerKick {};

using SequenceElement = std::variant<PulseSpec, Wait, DopplerKick>;

// Blow-away removes the upper qubit state; survival then means the lower
// state. With pre_pi, Raman pi pulses on both atoms precede it, and survival
// is reported as the upper state.
struct Measurement {
  bool pre_pi = false;
  bool blow_away = true;
};

struct RabiFrequencies {
  double raman87 = 0.0;    // rad/s
  double raman85 = 0.0;
  double rydberg87 = 0.0;
  double rydberg85 = 0.0;

  double get(Atom a, Transition t) const;
  static RabiFrequencies experimental();
};

struct SequenceSpec {
  std::vector<SequenceElement> elements;
  Measurement measurement;
  RabiFrequencies rabi = RabiFrequencies::experimental();

  void validate() const;
  std::size_t rydberg_pulse_count() const;
};

// Blockade shift node: dE in J (infinity allowed) with probability weight.
struct ShiftNode {
  double shift = std::numeric_limits<double>::infinity();
  double weight = 1.0;
};

struct DopplerParams {
  bool enabled = false;
  double temperature = 8e-6;  // K
  double mass = 0.0;          // kg, 0 selects the 87Rb mass
  double dt = 3.6e-6;         // s
  double lambda1 = 480e-9;    // m
  double lambda2 = 780e-9;    // m

  double velocity_sigma() const;
  double wavenumber() const;
};

struct ErrorModel {
  double excitation_efficiency87 = 0.96;
  double excitation_efficiency85 = 0.96;
  double detection_efficiency = 0.90;
  double rydberg_lifetime = 180e-6;  // s, infinity disables decay
  std::vector<ShiftNode> blockade{ShiftNode{}};
  DopplerParams doppler;
  double raman_amplitude_drift = 0.0;  // relative, uniform in +-drift per run

  void validate() const;
  double excitation_efficiency(Atom a) const { return a == Atom::rb87 ? excitation_efficiency87 : excitation_efficiency85; }

  static ErrorModel ideal();
  // Efficiencies, lifetime, Doppler at 8 uK / 3.6 us and 10 % Raman drift;
  // blockade stays perfect until a computed shift distribution is supplied.
  static ErrorModel experimental();
};

// One draw of every stochastic ingredient of a run.
struct Realization {
  std::vector<bool> excitation_failed;  // per Rydberg pulse, in order
  double doppler_phase = 0.0;           // rad
  double raman_scale = 1.0;             // multiplies every Raman area
  double shift = std::numeric_limits<double>::infinity();  // J
};

// Omega_red Omega_blue / (2 Delta). Throws DomainError for Delta = 0.
double effective_rabi(double omega_red, double omega_blue, double delta_int);

// Single pulse on a normalized state. Throws InvalidInput if |norm - 1| > 1e-9.
// The blockade detuning dE/hbar is taken from the first blockade node.
TwoAtomState apply_pulse(const TwoAtomState& state, const PulseSpec& pulse, const ErrorModel& em,
                         const RabiFrequencies& rabi = RabiFrequencies::experimental());

// Phase exp(i k v dt) on every amplitude with the 87Rb atom in |r>.
TwoAtomState inject_doppler_phase(const TwoAtomState& state, double velocity, double dt, double lambda1,
                                  double lambda2);

// Unnormalized no-jump propagation of one realization; the missing norm is
// population lost by Rydberg decay.
TwoAtomState propagate(const SequenceSpec& seq, const TwoAtomState& initial, const ErrorModel& em,
                       const Realization& r);

// Readout statistics. survival[s87][s85] is the joint probability of the two
// survival flags; loss is trace loss from decay. Entries sum to 1.
struct ReadoutDistribution {
  std::array<std::array<double, 2>, 2> survival{};
  double loss = 0.0;

  // Logical cells indexed 2c + t (c: 0 = down, 1 = up; t: 0 = Down, 1 = Up),
  // using the survival labelling of the measurement directive.
  std::array<double, 4> cells(const Measurement& m) const;
};

struct ShotOutcome {
  bool survived87 = false;
  bool survived85 = false;
  bool lost = false;
};

struct ExactOptions {
  std::size_t doppler_nodes = 12;
  std::size_t drift_nodes = 6;
};

struct SampledOptions {
  std::size_t n_shots = 150;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct ExactResult {
  ReadoutDistribution readout;
  std::array<double, 9> populations{};  // branch-averaged before measurement
};

struct SampledResult {
  std::vector<ShotOutcome> shots;
  ReadoutDistribution frequencies;
};

// Exact mode enumerates excitation-failure patterns and quadrature nodes for
// the Doppler velocity, Raman drift and blockade shift.
ExactResult run_sequence(const SequenceSpec& seq, const TwoAtomState& initial, const ErrorModel& em,
                         const ExactOptions& options = {});
// Sampled mode draws one realization per shot; shots are split into fixed
// chunks with independent streams.
SampledResult run_sequence(const SequenceSpec& seq, const TwoAtomState& initial, const ErrorModel& em,
                           const SampledOptions& options);

// Standard protocol pieces.
SequenceSpec cnot_sequence(double relative_phase, const RabiFrequencies& rabi = RabiFrequencies::experimental());

struct BlockadeDemoCurve {
  std::vector<double> t;         // s
  std::vector<double> survival;  // 85Rb survival probability
  double peak_to_peak = 0.0;
};

// pi(87) - wait 0.3 us - Rydberg pulse of duration t on 85Rb, readout of 85Rb
// without blow-away. With control, shots where 87Rb is still trapped are
// discarded; without control, the 87Rb atom is absent.
BlockadeDemoCurve blockade_demo(const std::vector<double>& t85_grid, bool with_control, const ErrorModel& em,
                                const RabiFrequencies& rabi = RabiFrequencies::experimental(),
                                const ExactOptions& options = {});

struct TruthTable {
  std::array<std::array<double, 4>, 4> p{};  // [input][output], logical index 2c + t
  std::array<double, 4> loss{};
};

TruthTable cnot_truth_table(double relative_phase, const ErrorModel& em,
                            const RabiFrequencies& rabi = RabiFrequencies::experimental(),
                            const ExactOptions& options = {});
TruthTable ideal_cnot_table();

struct PhaseScan {
  std::vector<double> phase;
  std::vector<std::array<double, 4>> from_down_up;  // input |down, Up>
  std::vector<std::array<double, 4>> from_up_up;    // input |up, Up>
};
PhaseScan cnot_phase_scan(const std::vector<double>& phases, const ErrorModel& em,
                          const RabiFrequencies& rabi = RabiFrequencies::experimental(),
                          const ExactOptions& options = {});

struct ParityScan {
  std::vector<double> phi;
  std::vector<std::array<double, 4>> cells;  // P(down Down), P(down Up), P(up Down), P(up Up)
  std::vector<double> parity;
  std::array<double, 4> bell_cells{};        // without analysis pulses
};

// (|up> + i|down>)|Down>/sqrt2 -> CNOT -> pi/2 analysis pulses with phase
// phi1 on both atoms.
ParityScan entangle_and_parity(const std::vector<double>& phi_grid, const ErrorModel& em,
                               const RabiFrequencies& rabi = RabiFrequencies::experimental(),
                               const ExactOptions& options = {});
SequenceSpec bell_sequence(bool analysis, double phi1, const RabiFrequencies& rabi = RabiFrequencies::experimental());

// Thermal blockade distribution: Gauss-Hermite nodes over y mapped through
// P85(|y|) to dE = blockade_shift(P85, omega85).
std::vector<ShiftNode> blockade_shift_nodes(const thermal::P85Curve& curve, const thermal::OffsetDistribution& dist,
                                            double omega85, std::size_t n_nodes = 32);

// Sequence files: {"elements": [{"kind": "raman" | "rydberg" | "wait" |
// "doppler", "atom": "Rb87" | "Rb85", "area_over_pi", "phase_rad",
// "detuning_rad_s", "duration_us"}], "measurement": {"pre_pi", "blow_away"}}.
SequenceSpec parse_sequence_json(const std::string& text, const RabiFrequencies& rabi = RabiFrequencies::experimental());
SequenceSpec load_sequence(const std::string& path, const RabiFrequencies& rabi = RabiFrequencies::experimental());

}  // namespace rydgate::gate
