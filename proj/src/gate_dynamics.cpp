#include "rydgate/gate_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"
#include "rydgate/parallel.hpp"

namespace rydgate::gate {

namespace c = constants;
using cplx = std::complex<double>;

namespace {

constexpr double kRb87MassU = 86.909180527;
constexpr std::size_t kShotChunk = 1024;

// exp(-i H t) on (lower, upper) with H = [[0, -W/2 e^{-i phi}], [-W/2 e^{i phi}, delta]],
// delta = detuning - i gamma/2. Returned row-major.
std::array<cplx, 4> two_level_propagator(double omega, double phase, double detuning, double gamma, double t) {
  const cplx delta(detuning, -0.5 * gamma);
  const cplx m0 = 0.5 * delta;
  const cplx mz = -0.5 * delta;
  const double mx = -0.5 * omega * std::cos(phase);
  const double my = -0.5 * omega * std::sin(phase);
  const cplx kappa = std::sqrt(mx * mx + my * my + mz * mz);
  const cplx ck = std::cos(kappa * t);
  const cplx sk = std::abs(kappa * t) < 1e-8 ? cplx(t) : std::sin(kappa * t) / kappa;
  const cplx pre = std::exp(-cplx(0.0, 1.0) * m0 * t);
  const cplx i(0.0, 1.0);
  return {pre * (ck - i * sk * mz), pre * (-i * sk * cplx(mx, -my)), pre * (-i * sk * cplx(mx, my)),
          pre * (ck + i * sk * mz)};
}

double decay_rate(const ErrorModel& em) { return std::isfinite(em.rydberg_lifetime) ? 1.0 / em.rydberg_lifetime : 0.0; }

std::size_t idx(Atom driven, int level_driven, int level_other) {
  return driven == Atom::rb87 ? TwoAtomState::index(level_driven, level_other)
                              : TwoAtomState::index(level_other, level_driven);
}

double pulse_duration(const PulseSpec& p, const RabiFrequencies& rabi) {
  if (p.duration > 0.0) return p.duration;
  if (p.area == 0.0) return 0.0;
  const double omega = rabi.get(p.atom, p.kind);
  if (!(omega > 0.0)) throw ConfigError("pulse needs a duration or a positive Rabi frequency for " + to_string(p.atom));
  return p.area / omega;
}

void decay_all(TwoAtomState& s, double gamma, double t) {
  if (gamma == 0.0 || t == 0.0) return;
  const double f = std::exp(-0.5 * gamma * t);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const int nr = (a == kRydberg) + (b == kRydberg);
      if (nr > 0) s[TwoAtomState::index(a, b)] *= std::pow(f, nr);
    }
  }
}

void apply_pulse_inplace(TwoAtomState& s, const PulseSpec& p, const ErrorModel& em, const RabiFrequencies& rabi,
                         bool failed, double raman_scale, double shift) {
  const double gamma = decay_rate(em);
  const double tau = pulse_duration(p, rabi);
  if (failed) {
    decay_all(s, gamma, tau);
    return;
  }
  const double area = p.kind == Transition::raman ? p.area * raman_scale : p.area;
  const double omega = tau > 0.0 ? area / tau : 0.0;
  const int lo = p.kind == Transition::raman ? kLower : kUpper;
  const int hi = lo + 1;
  const int spectator = p.kind == Transition::raman ? kRydberg : kLower;
  const double gamma_hi = p.kind == Transition::rydberg ? gamma : 0.0;
  const double idle = std::exp(-0.5 * gamma * tau);

  for (int b = 0; b < 3; ++b) {
    const double other = b == kRydberg ? idle : 1.0;
    const std::size_t il = idx(p.atom, lo, b), ih = idx(p.atom, hi, b);
    const cplx al = s[il], ah = s[ih];
    const bool blockaded = p.kind == Transition::rydberg && b == kRydberg;
    if (blockaded && !std::isfinite(shift)) {
      // Infinitely detuned: no transfer, only free evolution of the upper level.
      s[ih] = ah * std::exp(cplx(-0.5 * gamma_hi * tau, -p.detuning * tau)) * other;
      s[il] = al * other;
    } else {
      const double detuning = p.detuning + (blockaded ? shift / c::hbar : 0.0);
      const auto u = two_level_propagator(omega, p.phase, detuning, gamma_hi, tau);
      s[il] = (u[0] * al + u[1] * ah) * other;
      s[ih] = (u[2] * al + u[3] * ah) * other;
    }
    const std::size_t isp = idx(p.atom, spectator, b);
    if (spectator == kRydberg) s[isp] *= idle;
    s[isp] *= other;
  }
}

void apply_doppler(TwoAtomState& s, double phi) {
  const cplx f = std::polar(1.0, phi);
  for (int b = 0; b < 3; ++b) s[TwoAtomState::index(kRydberg, b)] *= f;
}

std::vector<SequenceElement> full_elements(const SequenceSpec& seq) {
  std::vector<SequenceElement> out = seq.elements;
  if (seq.measurement.pre_pi) {
    out.push_back(PulseSpec{Atom::rb87, Transition::raman, c::pi, 0.0, 0.0, 0.0});
    out.push_back(PulseSpec{Atom::rb85, Transition::raman, c::pi, 0.0, 0.0, 0.0});
  }
  return out;
}

TwoAtomState propagate_elements(const std::vector<SequenceElement>& elements, const RabiFrequencies& rabi,
                                const TwoAtomState& initial, const ErrorModel& em, const Realization& r) {
  TwoAtomState s = initial;
  std::size_t ryd = 0;
  for (const auto& e : elements) {
    if (const auto* p = std::get_if<PulseSpec>(&e)) {
      bool failed = false;
      if (p->kind == Transition::rydberg) {
        failed = ryd < r.excitation_failed.size() && r.excitation_failed[ryd];
        ++ryd;
      }
      apply_pulse_inplace(s, *p, em, rabi, failed, r.raman_scale, r.shift);
    } else if (const auto* w = std::get_if<Wait>(&e)) {
      decay_all(s, decay_rate(em), w->duration);
    } else {
      apply_doppler(s, r.doppler_phase);
    }
  }
  return s;
}

double survival_probability(int level, const Measurement& m, double detection) {
  if (level == kLower) return 1.0;
  if (level == kUpper) return m.blow_away ? 0.0 : 1.0;
  return 1.0 - detection;
}

void accumulate_readout(ReadoutDistribution& out, const TwoAtomState& s, const Measurement& m, double detection,
                        double weight) {
  out.loss += weight * std::max(0.0, 1.0 - s.norm_squared());
  for (int a = 0; a < 3; ++a) {
    const double s87 = survival_probability(a, m, detection);
    for (int b = 0; b < 3; ++b) {
      const double p = weight * s.population(a, b);
      if (p == 0.0) continue;
      const double s85 = survival_probability(b, m, detection);
      out.survival[1][1] += p * s87 * s85;
      out.survival[1][0] += p * s87 * (1.0 - s85);
      out.survival[0][1] += p * (1.0 - s87) * s85;
      out.survival[0][0] += p * (1.0 - s87) * (1.0 - s85);
    }
  }
}

bool has_doppler(const std::vector<SequenceElement>& elements) {
  return std::any_of(elements.begin(), elements.end(), [](const auto& e) { return std::holds_alternative<DopplerKick>(e); });
}

bool has_raman(const std::vector<SequenceElement>& elements) {
  return std::any_of(elements.begin(), elements.end(), [](const auto& e) {
    const auto* p = std::get_if<PulseSpec>(&e);
    return p != nullptr && p->kind == Transition::raman;
  });
}

std::vector<double> rydberg_efficiencies(const std::vector<SequenceElement>& elements, const ErrorModel& em) {
  std::vector<double> out;
  for (const auto& e : elements) {
    const auto* p = std::get_if<PulseSpec>(&e);
    if (p != nullptr && p->kind == Transition::rydberg) out.push_back(em.excitation_efficiency(p->atom));
  }
  return out;
}

void require_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::string to_string(Atom a) { return a == Atom::rb87 ? "Rb87" : "Rb85"; }
std::string to_string(Transition t) { return t == Transition::raman ? "raman" : "rydberg"; }

TwoAtomState TwoAtomState::basis(int level87, int level85) {
  if (level87 < 0 || level87 > 2 || level85 < 0 || level85 > 2) throw InvalidInput("TwoAtomState: level out of range");
  Vector v = Vector::Zero();
  v[static_cast<Eigen::Index>(index(level87, level85))] = 1.0;
  return TwoAtomState(v);
}

void PulseSpec::validate() const {
  if (!(area >= 0.0) || !std::isfinite(area)) throw ConfigError("pulse area must be non-negative");
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("pulse duration must be non-negative");
  if (!std::isfinite(phase) || !std::isfinite(detuning)) throw ConfigError("pulse phase and detuning must be finite");
}

double RabiFrequencies::get(Atom a, Transition t) const {
  if (t == Transition::raman) return a == Atom::rb87 ? raman87 : raman85;
  return a == Atom::rb87 ? rydberg87 : rydberg85;
}

RabiFrequencies RabiFrequencies::experimental() {
  const double mhz = c::two_pi * 1e6;
  RabiFrequencies r;
  r.raman87 = 0.625 * mhz;
  r.raman85 = 0.625 * mhz;
  r.rydberg87 = effective_rabi(226 * mhz, 28 * mhz, 4800 * mhz);
  r.rydberg85 = effective_rabi(206 * mhz, 28 * mhz, 4800 * mhz);
  return r;
}

void SequenceSpec::validate() const {
  for (const auto& e : elements) {
    if (const auto* p = std::get_if<PulseSpec>(&e)) {
      p->validate();
      pulse_duration(*p, rabi);
    } else if (const auto* w = std::get_if<Wait>(&e)) {
      if (!(w->duration >= 0.0) || !std::isfinite(w->duration)) throw ConfigError("wait duration must be non-negative");
    }
  }
}

std::size_t SequenceSpec::rydberg_pulse_count() const { return rydberg_efficiencies(elements, ErrorModel::ideal()).size(); }

double DopplerParams::velocity_sigma() const {
  return thermal::doppler_velocity_sigma(temperature, mass > 0.0 ? mass : kRb87MassU * c::atomic_mass_unit);
}

double DopplerParams::wavenumber() const { return thermal::doppler_wavenumber(lambda1, lambda2); }

void ErrorModel::validate() const {
  require_unit_interval(excitation_efficiency87, "excitation_efficiency87");
  require_unit_interval(excitation_efficiency85, "excitation_efficiency85");
  require_unit_interval(detection_efficiency, "detection_efficiency");
  if (!(rydberg_lifetime > 0.0)) throw ConfigError("rydberg_lifetime must be positive");
  if (blockade.empty()) throw ConfigError("blockade needs at least one shift node");
  double total = 0.0;
  for (const auto& n : blockade) {
    if (!(n.shift >= 0.0) || !(n.weight >= 0.0)) throw ConfigError("blockade nodes need non-negative shift and weight");
    total += n.weight;
  }
  if (!(total > 0.0)) throw ConfigError("blockade node weights sum to zero");
  if (!(raman_amplitude_drift >= 0.0 && raman_amplitude_drift < 1.0)) throw ConfigError("raman_amplitude_drift must lie in [0, 1)");
  if (doppler.enabled) {
    if (!(doppler.temperature >= 0.0) || !(doppler.dt >= 0.0)) throw ConfigError("doppler temperature and dt must be non-negative");
    doppler.wavenumber();
  }
}

ErrorModel ErrorModel::ideal() {
  ErrorModel em;
  em.excitation_efficiency87 = 1.0;
  em.excitation_efficiency85 = 1.0;
  em.detection_efficiency = 1.0;
  em.rydberg_lifetime = std::numeric_limits<double>::infinity();
  em.doppler.enabled = false;
  em.raman_amplitude_drift = 0.0;
  return em;
}

ErrorModel ErrorModel::experimental() {
  ErrorModel em;
  em.doppler.enabled = true;
  em.raman_amplitude_drift = 0.10;
  return em;
}

double effective_rabi(double omega_red, double omega_blue, double delta_int) {
  if (delta_int == 0.0 || !std::isfinite(delta_int)) throw DomainError("effective_rabi: intermediate detuning must be non-zero");
  return omega_red * omega_blue / (2.0 * delta_int);
}

TwoAtomState apply_pulse(const TwoAtomState& state, const PulseSpec& pulse, const ErrorModel& em,
                         const RabiFrequencies& rabi) {
  if (std::abs(state.norm_squared() - 1.0) > 1e-9) throw InvalidInput("apply_pulse: state is not normalized");
  pulse.validate();
  em.validate();
  TwoAtomState out = state;
  apply_pulse_inplace(out, pulse, em, rabi, false, 1.0, em.blockade.front().shift);
  return out;
}

TwoAtomState inject_doppler_phase(const TwoAtomState& state, double velocity, double dt, double lambda1,
                                  double lambda2) {
  if (!std::isfinite(velocity)) throw InvalidInput("inject_doppler_phase: velocity must be finite");
  TwoAtomState out = state;
  apply_doppler(out, thermal::doppler_wavenumber(lambda1, lambda2) * velocity * dt);
  return out;
}

TwoAtomState propagate(const SequenceSpec& seq, const TwoAtomState& initial, const ErrorModel& em,
                       const Realization& r) {
  return propagate_elements(full_elements(seq), seq.rabi, initial, em, r);
}

std::array<double, 4> ReadoutDistribution::cells(const Measurement& m) const {
  std::array<double, 4> out{};
  for (int s87 = 0; s87 < 2; ++s87) {
    for (int s85 = 0; s85 < 2; ++s85) {
      const int cbit = m.pre_pi ? s87 : 1 - s87;
      const int tbit = m.pre_pi ? s85 : 1 - s85;
      out[static_cast<std::size_t>(2 * cbit + tbit)] += survival[s87][s85];
    }
  }
  return out;
}

ExactResult run_sequence(const SequenceSpec& seq, const TwoAtomState& initial, const ErrorModel& em,
                         const ExactOptions& options) {
  seq.validate();
  em.validate();
  const auto elements = full_elements(seq);
  const auto eff = rydberg_efficiencies(elements, em);

  struct Node {
    double value;
    double weight;
  };
  std::vector<Node> doppler{{0.0, 1.0}}, drift{{1.0, 1.0}}, shifts;
  if (em.doppler.enabled && has_doppler(elements) && em.doppler.temperature > 0.0 && em.doppler.dt > 0.0) {
    const auto rule = thermal::gauss_hermite_normal(options.doppler_nodes);
    const double scale = em.doppler.wavenumber() * em.doppler.velocity_sigma() * em.doppler.dt;
    doppler.clear();
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) doppler.push_back({scale * rule.nodes[i], rule.weights[i]});
  }
  if (em.raman_amplitude_drift > 0.0 && has_raman(elements)) {
    const auto rule = thermal::gauss_legendre_uniform(options.drift_nodes);
    drift.clear();
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      drift.push_back({1.0 + em.raman_amplitude_drift * rule.nodes[i], rule.weights[i]});
    }
  }
  double total = 0.0;
  for (const auto& n : em.blockade) total += n.weight;
  for (const auto& n : em.blockade) {
    if (n.weight > 0.0) shifts.push_back({n.shift, n.weight / total});
  }

  // Failure patterns with non-zero probability.
  std::vector<std::pair<std::vector<bool>, double>> patterns{{{}, 1.0}};
  for (double e : eff) {
    std::vector<std::pair<std::vector<bool>, double>> next;
    for (const auto& [mask, w] : patterns) {
      for (bool fail : {false, true}) {
        const double pw = fail ? 1.0 - e : e;
        if (pw == 0.0) continue;
        auto m = mask;
        m.push_back(fail);
        next.emplace_back(std::move(m), w * pw);
      }
    }
    patterns = std::move(next);
  }

  ExactResult result;
  Realization r;
  for (const auto& [mask, wm] : patterns) {
    r.excitation_failed = mask;
    for (const auto& d : doppler) {
      r.doppler_phase = d.value;
      for (const auto& g : drift) {
        r.raman_scale = g.value;
        for (const auto& sh : shifts) {
          r.shift = sh.value;
          const double w = wm * d.weight * g.weight * sh.weight;
          const TwoAtomState s = propagate_elements(elements, seq.rabi, initial, em, r);
          accumulate_readout(result.readout, s, seq.measurement, em.detection_efficiency, w);
          for (std::size_t i = 0; i < 9; ++i) result.populations[i] += w * std::norm(s[i]);
        }
      }
    }
  }
  return result;
}

SampledResult run_sequence(const SequenceSpec& seq, const TwoAtomState& initial, const ErrorModel& em,
                           const SampledOptions& options) {
  seq.validate();
  em.validate();
  if (options.n_shots == 0) throw InvalidInput("sampled mode needs at least one shot");
  const auto elements = full_elements(seq);
  const auto eff = rydberg_efficiencies(elements, em);
  const bool doppler = em.doppler.enabled && has_doppler(elements);
  const double kdt = doppler ? em.doppler.wavenumber() * em.doppler.dt : 0.0;
  const double sv = doppler ? em.doppler.velocity_sigma() : 0.0;
  std::vector<double> shift_weights;
  for (const auto& n : em.blockade) shift_weights.push_back(n.weight);

  const std::size_t chunks = (options.n_shots + kShotChunk - 1) / kShotChunk;
  const auto parts = parallel_map(chunks, options.jobs, [&](std::size_t ci) {
    thermal::Rng rng = thermal::make_rng(options.seed, ci);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::discrete_distribution<std::size_t> pick_shift(shift_weights.begin(), shift_weights.end());
    const std::size_t n = std::min(kShotChunk, options.n_shots - ci * kShotChunk);
    std::vector<ShotOutcome> shots;
    shots.reserve(n);
    Realization r;
    for (std::size_t k = 0; k < n; ++k) {
      r.excitation_failed.assign(eff.size(), false);
      for (std::size_t i = 0; i < eff.size(); ++i) r.excitation_failed[i] = uni(rng) >= eff[i];
      r.doppler_phase = doppler ? kdt * sv * normal(rng) : 0.0;
      r.raman_scale = 1.0 + em.raman_amplitude_drift * (2.0 * uni(rng) - 1.0);
      r.shift = em.blockade[pick_shift(rng)].shift;
      const TwoAtomState s = propagate_elements(elements, seq.rabi, initial, em, r);

      ShotOutcome shot;
      // The no-jump norm is the probability that no decay happened.
      const double u = uni(rng);
      if (u >= s.norm_squared()) {
        shot.lost = true;
      } else {
        double acc = 0.0;
        std::size_t chosen = 8;
        for (std::size_t i = 0; i < 9; ++i) {
          acc += std::norm(s[i]);
          if (u < acc) {
            chosen = i;
            break;
          }
        }
        const int a = static_cast<int>(chosen / 3), b = static_cast<int>(chosen % 3);
        shot.survived87 = uni(rng) < survival_probability(a, seq.measurement, em.detection_efficiency);
        shot.survived85 = uni(rng) < survival_probability(b, seq.measurement, em.detection_efficiency);
      }
      shots.push_back(shot);
    }
    return shots;
  });

  SampledResult result;
  result.shots.reserve(options.n_shots);
  for (const auto& p : parts) result.shots.insert(result.shots.end(), p.begin(), p.end());
  const double inv = 1.0 / static_cast<double>(result.shots.size());
  for (const auto& s : result.shots) {
    if (s.lost) {
      result.frequencies.loss += inv;
    } else {
      result.frequencies.survival[s.survived87][s.survived85] += inv;
    }
  }
  return result;
}

SequenceSpec cnot_sequence(double relative_phase, const RabiFrequencies& rabi) {
  SequenceSpec seq;
  seq.rabi = rabi;
  seq.elements = {
      PulseSpec{Atom::rb85, Transition::raman, c::pi / 2, 0.0, 0.0, 0.0},
      PulseSpec{Atom::rb87, Transition::rydberg, c::pi, 0.0, 0.0, 0.0},
      PulseSpec{Atom::rb85, Transition::rydberg, 2 * c::pi, 0.0, 0.0, 0.0},
      DopplerKick{},
      // Phase pi returns |r> to +|up>.
      PulseSpec{Atom::rb87, Transition::rydberg, c::pi, c::pi, 0.0, 0.0},
      PulseSpec{Atom::rb85, Transition::raman, c::pi / 2, relative_phase, 0.0, 0.0},
  };
  seq.measurement = Measurement{true, true};
  return seq;
}

BlockadeDemoCurve blockade_demo(const std::vector<double>& t85_grid, bool with_control, const ErrorModel& em,
                                const RabiFrequencies& rabi, const ExactOptions& options) {
  if (t85_grid.empty()) throw InvalidInput("blockade_demo: empty time grid");
  BlockadeDemoCurve curve;
  curve.t = t85_grid;
  for (double t : t85_grid) {
    if (!(t >= 0.0)) throw InvalidInput("blockade_demo: negative pulse duration");
    SequenceSpec seq;
    seq.rabi = rabi;
    if (with_control) seq.elements.push_back(PulseSpec{Atom::rb87, Transition::rydberg, c::pi, 0.0, 0.0, 0.0});
    seq.elements.push_back(Wait{0.3e-6});
    seq.elements.push_back(PulseSpec{Atom::rb85, Transition::rydberg, rabi.rydberg85 * t, 0.0, 0.0, t});
    seq.measurement = Measurement{false, false};
    const TwoAtomState initial = TwoAtomState::basis(with_control ? kUpper : kLower, kUpper);
    const auto res = run_sequence(seq, initial, em, options);
    const auto& sv = res.readout.survival;
    double p = 0.0;
    if (with_control) {
      const double kept = sv[0][0] + sv[0][1];
      p = kept > 0.0 ? sv[0][1] / kept : 0.0;
    } else {
      p = sv[0][1] + sv[1][1];
    }
    curve.survival.push_back(p);
  }
  const auto [lo, hi] = std::minmax_element(curve.survival.begin(), curve.survival.end());
  curve.peak_to_peak = *hi - *lo;
  return curve;
}

TruthTable cnot_truth_table(double relative_phase, const ErrorModel& em, const RabiFrequencies& rabi,
                            const ExactOptions& options) {
  const SequenceSpec seq = cnot_sequence(relative_phase, rabi);
  TruthTable table;
  for (int cbit = 0; cbit < 2; ++cbit) {
    for (int tbit = 0; tbit < 2; ++tbit) {
      const auto res = run_sequence(seq, TwoAtomState::basis(cbit, tbit), em, options);
      const std::size_t row = static_cast<std::size_t>(2 * cbit + tbit);
      table.p[row] = res.readout.cells(seq.measurement);
      table.loss[row] = res.readout.loss;
    }
  }
  return table;
}

TruthTable ideal_cnot_table() {
  TruthTable t;
  t.p[0][0] = 1.0;
  t.p[1][1] = 1.0;
  t.p[2][3] = 1.0;
  t.p[3][2] = 1.0;
  return t;
}

PhaseScan cnot_phase_scan(const std::vector<double>& phases, const ErrorModel& em, const RabiFrequencies& rabi,
                          const ExactOptions& options) {
  if (phases.empty()) throw InvalidInput("cnot_phase_scan: empty phase grid");
  PhaseScan scan;
  scan.phase = phases;
  for (double phi : phases) {
    const SequenceSpec seq = cnot_sequence(phi, rabi);
    scan.from_down_up.push_back(run_sequence(seq, TwoAtomState::basis(kLower, kUpper), em, options).readout.cells(seq.measurement));
    scan.from_up_up.push_back(run_sequence(seq, TwoAtomState::basis(kUpper, kUpper), em, options).readout.cells(seq.measurement));
  }
  return scan;
}

SequenceSpec bell_sequence(bool analysis, double phi1, const RabiFrequencies& rabi) {
  SequenceSpec seq = cnot_sequence(0.0, rabi);
  seq.elements.insert(seq.elements.begin(), PulseSpec{Atom::rb87, Transition::raman, c::pi / 2, 0.0, 0.0, 0.0});
  if (analysis) {
    seq.elements.push_back(PulseSpec{Atom::rb87, Transition::raman, c::pi / 2, phi1, 0.0, 0.0});
    seq.elements.push_back(PulseSpec{Atom::rb85, Transition::raman, c::pi / 2, phi1, 0.0, 0.0});
  }
  seq.measurement = Measurement{false, true};
  return seq;
}

ParityScan entangle_and_parity(const std::vector<double>& phi_grid, const ErrorModel& em, const RabiFrequencies& rabi,
                               const ExactOptions& options) {
  if (phi_grid.empty()) throw InvalidInput("entangle_and_parity: empty phase grid");
  const TwoAtomState initial = TwoAtomState::basis(kUpper, kLower);
  ParityScan scan;
  scan.phi = phi_grid;
  const SequenceSpec bell = bell_sequence(false, 0.0, rabi);
  scan.bell_cells = run_sequence(bell, initial, em, options).readout.cells(bell.measurement);
  for (double phi : phi_grid) {
    const SequenceSpec seq = bell_sequence(true, phi, rabi);
    const auto cells = run_sequence(seq, initial, em, options).readout.cells(seq.measurement);
    scan.cells.push_back(cells);
    scan.parity.push_back(cells[3] + cells[0] - cells[2] - cells[1]);
  }
  return scan;
}

std::vector<ShiftNode> blockade_shift_nodes(const thermal::P85Curve& curve, const thermal::OffsetDistribution& dist,
                                            double omega85, std::size_t n_nodes) {
  const auto rule = thermal::gauss_hermite_normal(n_nodes);
  std::vector<ShiftNode> out;
  out.reserve(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const double p = curve(dist.sigma * rule.nodes[i]);
    const double shift = p > 0.0 ? pair::blockade_shift(std::min(p, 1.0), omega85) : std::numeric_limits<double>::infinity();
    out.push_back(ShiftNode{shift, rule.weights[i]});
  }
  return out;
}

SequenceSpec parse_sequence_json(const std::string& text, const RabiFrequencies& rabi) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sequence file: ") + e.what());
  }
  SequenceSpec seq;
  seq.rabi = rabi;
  try {
    for (const auto& el : doc.at("elements")) {
      const std::string kind = el.at("kind").get<std::string>();
      if (kind == "wait") {
        seq.elements.push_back(Wait{el.at("duration_us").get<double>() * 1e-6});
      } else if (kind == "doppler") {
        seq.elements.push_back(DopplerKick{});
      } else if (kind == "raman" || kind == "rydberg") {
        PulseSpec p;
        const std::string atom = el.at("atom").get<std::string>();
        if (atom == "Rb87") {
          p.atom = Atom::rb87;
        } else if (atom == "Rb85") {
          p.atom = Atom::rb85;
        } else {
          throw ConfigError("sequence file: unknown atom '" + atom + "'");
        }
        p.kind = kind == "raman" ? Transition::raman : Transition::rydberg;
        p.area = el.at("area_over_pi").get<double>() * c::pi;
        p.phase = el.value("phase_rad", 0.0);
        p.detuning = el.value("detuning_rad_s", 0.0);
        p.duration = el.value("duration_us", 0.0) * 1e-6;
        seq.elements.push_back(p);
      } else {
        throw ConfigError("sequence file: unknown element kind '" + kind + "'");
      }
    }
    if (doc.contains("measurement")) {
      const auto& m = doc.at("measurement");
      seq.measurement.pre_pi = m.value("pre_pi", false);
      seq.measurement.blow_away = m.value("blow_away", true);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sequence file: ") + e.what());
  }
  seq.validate();
  return seq;
}

SequenceSpec load_sequence(const std::string& path, const RabiFrequencies& rabi) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sequence file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sequence_json(ss.str(), rabi);
}

}  // namespace rydgate::gate
