// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero if
// any gating check fails. Criterion 7's factor-2 target is reported but not
// gating; its property suite is.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "rydgate/analysis.hpp"
#include "rydgate/atom_structure.hpp"
#include "rydgate/constants.hpp"
#include "rydgate/gate_dynamics.hpp"
#include "rydgate/pair_hamiltonian.hpp"
#include "rydgate/thermal_ensemble.hpp"

using namespace rydgate;
namespace c = constants;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  bool gating = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

const double uK = 1e-6;
const double um = 1e-6;
const double MHz = 1e6;

const atom::SpeciesTable& rubidium() {
  static const atom::SpeciesTable t = atom::SpeciesTable::load(fs::path(RYDGATE_DATA_DIR) / "rubidium.json");
  return t;
}
double m87() { return rubidium().get("Rb87")->mass; }
double m85() { return rubidium().get("Rb85")->mass; }

// Columns of a CSV written by the command layer.
std::map<std::string, std::vector<double>> read_table(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> cols;
  std::map<std::string, std::vector<double>> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cols.empty()) {
      cols = cells;
      continue;
    }
    for (std::size_t i = 0; i < cells.size() && i < cols.size(); ++i) out[cols[i]].push_back(std::stod(cells[i]));
  }
  return out;
}

double mahalanobis2(const analysis::FitResult& r, const std::vector<double>& truth, const std::vector<Eigen::Index>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd cov(k, k);
  Eigen::VectorXd d(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    d[i] = r.params[static_cast<std::size_t>(idx[i])] - truth[static_cast<std::size_t>(idx[i])];
    for (Eigen::Index j = 0; j < k; ++j) cov(i, j) = r.covariance(idx[i], idx[j]);
  }
  return d.dot(cov.ldlt().solve(d));
}

// chi^2 quantiles at 95.45 % for 4 and 3 degrees of freedom.
constexpr double kChi2TwoSigma4 = 9.72;
constexpr double kChi2TwoSigma3 = 8.02;

// ---------------------------------------------------------------------------

void criterion1(Outcome& o) {
  const double m = m87();
  const int reps = 1000;
  double factor = 0.0;
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) factor += thermal::doppler_dephasing_factor(8 * uK, m, 3.6e-6, 480e-9, 780e-9);
  const double per_call = seconds_since(t0) / reps;
  factor /= reps;
  const auto mc = thermal::doppler_dephasing_mc(8 * uK, m, 3.6e-6, 480e-9, 780e-9, 1000000, 2024);
  const double z = std::abs(mc.value - factor) / mc.std_error;
  o.detail << "factor " << factor << ", " << per_call * 1e6 << " us/call, MC " << mc.value << " +- " << mc.std_error
           << " (" << z << " SE)";
  o.check(std::abs(factor - 0.78) <= 0.01, "0.78 +- 0.01");
  o.check(per_call < 1e-3, "runtime < 1 ms");
  o.check(z <= 3.0, "MC within 3 SE");
}

void criterion2(Outcome& o) {
  const double factor = thermal::doppler_dephasing_factor(8 * uK, m87(), 3.6e-6, 480e-9, 780e-9);
  const auto b = analysis::max_entanglement_fidelity(0.73, factor);
  o.detail << "F_phase " << b.f_phase << ", F_ent-max " << b.f_bound;
  o.check(std::abs(b.f_phase - 0.89) <= 0.005, "F_phase 0.89 +- 0.005");
  o.check(std::abs(b.f_bound - 0.65) <= 0.01, "F_ent-max 0.65 +- 0.01");
}

void criterion3(Outcome& o) {
  const double f = analysis::entanglement_fidelity(0.41, 0.44, 0.16);
  const bool entangled = f > 0.5;
  o.detail << "F " << f << ", entangled " << (entangled ? "true" : "false");
  o.check(std::abs(f - 0.585) <= 1e-12, "0.585");
  o.check(std::abs(f - 0.59) <= 0.03, "0.59 +- 0.03");
  o.check(entangled, "verdict");
}

void criterion4(Outcome& o) {
  const double omega = c::two_pi * 0.6 * MHz;
  const double shift = pair::blockade_shift(1e-6, omega) / c::planck;
  double worst = 0.0;
  for (double p : {1e-9, 1e-6, 1e-3, 0.013, 0.2, 0.5, 0.9, 1.0}) {
    const double back = pair::probability_from_shift(pair::blockade_shift(p, omega), omega);
    worst = std::max(worst, std::abs(back - p) / p);
  }
  o.detail << "dE/h " << shift / MHz << " MHz, round trip rel. error " << worst;
  o.check(std::abs(shift - 600 * MHz) <= 6 * MHz, "600 +- 6 MHz");
  o.check(worst <= 1e-12, "round trip 1e-12");
}

void criterion5(Outcome& o) {
  const double w = gate::effective_rabi(c::two_pi * 226 * MHz, c::two_pi * 28 * MHz, c::two_pi * 4800 * MHz) / c::two_pi;
  o.detail << "Omega/2pi " << w / MHz << " MHz, " << 100 * (w / (0.685 * MHz) - 1) << " % from 0.685 MHz";
  o.check(std::abs(w - 0.659 * MHz) <= 0.0005 * MHz, "0.659 MHz");
  o.check(std::abs(w / (0.685 * MHz) - 1) <= 0.05, "within 5 %");
}

void criterion6(Outcome& o) {
  const auto d = thermal::OffsetDistribution::from(thermal::ThermalState{8 * uK, 9 * uK, m87(), m85()},
                                                   thermal::TrapParams{c::two_pi * 1.39e3, c::two_pi * 16.9e3});
  const double beyond = std::erfc(10 * um / (d.sigma * std::sqrt(2.0)));
  o.detail << "sigma " << d.sigma / um << " um, P(|y| > 10 um) " << beyond;
  o.check(std::abs(d.sigma - 4.6 * um) <= 0.1 * um, "4.6 +- 0.1 um");
  o.check(beyond > 0.01, "offsets reach 10 um");
}

struct EndToEnd {
  double seconds = 0.0;
  cli::CommandOutput blockade, thermal, entangle;
  std::map<std::string, std::vector<double>> blockade_table, thermal_table;
  cli::RunConfig cfg;
};

EndToEnd run_end_to_end() {
  EndToEnd e;
  cli::Context ctx;
  ctx.cfg = cli::load_run_config(fs::path(RYDGATE_CONFIG_DIR) / "experiment.toml");
  ctx.cfg.output_dir = fs::temp_directory_path() / "rydgate_acceptance";
  fs::remove_all(ctx.cfg.output_dir);
  const auto t0 = Clock::now();
  e.blockade = cli::cmd_blockade(ctx);
  e.thermal = cli::cmd_thermal(ctx);
  e.entangle = cli::cmd_entangle(ctx);
  e.seconds = seconds_since(t0);
  e.blockade_table = read_table(e.blockade.files.at(0));
  e.thermal_table = read_table(e.thermal.files.at(0));
  e.cfg = ctx.cfg;
  return e;
}

void criterion7(Outcome& target, Outcome& props, const EndToEnd& e) {
  // Configured temperatures, B = 3 G first.
  const auto& at = e.thermal.summary.at("configured_temperatures");
  const double p = at.at(0).at("p85_mean").get<double>();
  const double mc = at.at(0).at("p85_mean_mc").get<double>();
  const double se = at.at(0).at("p85_mean_mc_std_error").get<double>();
  const double p0 = at.at(1).at("p85_mean").get<double>();
  target.gating = false;
  target.detail << "<P85> " << p << " at B = 3 G (" << p0 << " at B = 0), ratio to 0.013: " << p / 0.013;
  target.check(p >= 0.013 / 2 && p <= 0.013 * 2, "factor 2 of 0.013");

  // Non-decreasing in T for each field.
  const auto& field = e.thermal_table.at("field_G");
  const auto& mean = e.thermal_table.at("p85_mean");
  bool monotone = true;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (field[i] == field[i - 1] && mean[i] < mean[i - 1]) monotone = false;
  }
  // Windowed against infinite-time average over the whole y scan.
  const auto& pw = e.blockade_table.at("p85");
  const auto& pc = e.blockade_table.at("p85_infinite_time");
  double worst = 0.0;
  for (std::size_t i = 0; i < pw.size(); ++i) worst = std::max(worst, std::abs(pw[i] / pc[i] - 1));
  const double z = std::abs(mc - p) / se;
  props.detail << "monotone in T " << (monotone ? "yes" : "no") << ", quadrature vs MC " << z
               << " SE, window vs closed form max rel. " << worst;
  props.check(monotone, "monotone in T");
  props.check(z <= 3.0, "quadrature vs MC within 3 SE");
  props.check(worst <= 0.02, "time average within 2 %");
}

void criterion8(Outcome& o) {
  const auto t0 = Clock::now();
  const auto em = gate::ErrorModel::ideal();
  const auto table = gate::cnot_truth_table(0.0, em);
  const auto ideal = gate::ideal_cnot_table();
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(table.p[i][k] - ideal.p[i][k]));
  }
  std::vector<double> phi;
  for (int i = 0; i < 25; ++i) phi.push_back(c::pi * i / 24.0);
  const auto scan = gate::entangle_and_parity(phi, em);
  const auto fit = analysis::fit_parity(analysis::TimeSeries{scan.phi, scan.parity, {}});
  const double elapsed = seconds_since(t0);
  const auto [lo, hi] = std::minmax_element(scan.parity.begin(), scan.parity.end());
  const double amplitude = 0.5 * (*hi - *lo);
  o.detail << "max |entry error| " << worst << ", parity amplitude " << amplitude << ", |C1| " << fit.param("abs_c1")
           << ", " << elapsed * 1e3 << " ms";
  o.check(worst <= 1e-9, "truth table 1e-9");
  o.check(std::abs(amplitude - 1.0) <= 1e-6, "parity amplitude 1");
  o.check(std::abs(fit.param("abs_c1") - 0.5) <= 1e-6, "|C1| 0.5");
  o.check(elapsed < 1.0, "runtime < 1 s");
}

void criterion9(Outcome& o) {
  // Unitarity over 100 random pulses with a finite blockade.
  gate::ErrorModel em = gate::ErrorModel::ideal();
  em.blockade = {gate::ShiftNode{c::hbar * c::two_pi * 3 * MHz, 1.0}};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = gate::TwoAtomState::basis(gate::kUpper, gate::kUpper);
  for (int i = 0; i < 100; ++i) {
    gate::PulseSpec p;
    p.atom = u(rng) < 0.5 ? gate::Atom::rb87 : gate::Atom::rb85;
    p.kind = u(rng) < 0.5 ? gate::Transition::raman : gate::Transition::rydberg;
    p.area = 4 * c::pi * u(rng);
    p.phase = c::two_pi * u(rng);
    p.detuning = (u(rng) - 0.5) * c::two_pi * MHz;
    s = gate::apply_pulse(s, p, em);
  }
  const double drift = std::abs(s.norm_squared() - 1.0);

  // 1/R^3 on every coupled element of the pair basis, Hermiticity of H.
  const pair::FoersterModel model(
      pair::build_pair_basis(pair::default_channels(), pair::PairSetup{rubidium().get("Rb87"), rubidium().get("Rb85")}));
  const auto& basis = model.basis();
  const pair::Geometry g{3.8 * um, 1.0 * um};
  double scaling = 0.0;
  int coupled = 0;
  for (std::size_t k = 0; k < basis.states.size(); ++k) {
    const auto v1 = pair::dipole_dipole_element(basis.states[basis.reference_index], basis.states[k], g);
    if (std::abs(v1) == 0.0) continue;
    const auto v2 = pair::dipole_dipole_element(basis.states[basis.reference_index], basis.states[k], g.scaled(2.0));
    scaling = std::max(scaling, std::abs(8.0 * v2 - v1) / std::abs(v1));
    ++coupled;
  }
  const auto h = pair::blockade_hamiltonian(basis, model.hamiltonian(g, atom::FieldConfig{3.0}),
                                            pair::build_excitation_coupling(basis, c::two_pi * 0.6 * MHz));
  const double hermitian = (h - h.adjoint()).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff();

  // Selection rules.
  const auto sp = rubidium().get("Rb87");
  const auto lvl = [&](int n, int l, int j2, int m2) { return atom::RydbergLevel{sp, n, l, atom::HalfInt{j2}, atom::HalfInt{m2}}; };
  const auto d79 = lvl(79, 2, 5, 5);
  const bool zeros = atom::dipole_matrix_element(d79, lvl(81, 2, 5, 3), -1) == 0.0 &&
                     atom::dipole_matrix_element(d79, lvl(80, 1, 3, 1), -1) == 0.0 &&
                     atom::dipole_matrix_element(d79, lvl(80, 0, 1, 1), -1) == 0.0 &&
                     atom::angular_dipole_factor(2, atom::HalfInt{5}, atom::HalfInt{1}, 1, atom::HalfInt{1},
                                                 atom::HalfInt{1}, 0) == 0.0 &&
                     atom::dipole_matrix_element(d79, lvl(80, 1, 3, 3), -1) != 0.0;

  // Fit recovery on seeded synthetic sets: blockade-demonstration Rabi curve
  // (A 0.49, f 0.625 MHz, t0 28 us) and Bell parity (|C1| 0.16, Re C2 0.02).
  int damped_in = 0, parity_in = 0;
  const int trials = 20;
  for (int k = 0; k < trials; ++k) {
    auto r = thermal::make_rng(7, static_cast<std::uint64_t>(k));
    std::normal_distribution<double> e(0.0, 1.0);
    analysis::TimeSeries ts;
    for (int i = 0; i < 81; ++i) {
      const double t = 20e-6 * i / 80.0;
      ts.x.push_back(t);
      ts.y.push_back(0.5 + 0.49 * std::exp(-t / 28e-6) * std::cos(c::two_pi * 0.625 * MHz * t) + 0.015 * e(r));
    }
    const auto fd = analysis::fit_damped_sinusoid(ts);
    if (fd.converged && mahalanobis2(fd, {0.5, 0.49, 28e-6, 0.625 * MHz, 0.0}, {0, 1, 2, 3}) <= kChi2TwoSigma4) ++damped_in;

    analysis::TimeSeries ps;
    for (int i = 0; i < 25; ++i) {
      const double phi = c::pi * i / 24.0;
      ps.x.push_back(phi);
      ps.y.push_back(2 * 0.02 - 2 * 0.16 * std::cos(2 * phi) + 0.08 * e(r));
    }
    const auto fp = analysis::fit_parity(ps);
    if (mahalanobis2(fp, {0.02, 0.16, 0.0}, {0, 1, 2}) <= kChi2TwoSigma3) ++parity_in;
  }

  o.detail << "norm drift " << drift << ", 1/R^3 max rel. " << scaling << " over " << coupled << " elements, H asym "
           << hermitian << ", selection zeros " << (zeros ? "exact" : "broken") << ", joint 2 sigma: damped "
           << damped_in << "/" << trials << ", parity " << parity_in << "/" << trials;
  o.check(drift < 1e-9, "norm drift");
  o.check(coupled > 0 && scaling <= 1e-12, "1/R^3");
  o.check(hermitian <= 1e-12, "Hermitian");
  o.check(zeros, "selection rules");
  // About 95 % expected; 17 of 20 leaves room for binomial scatter.
  o.check(damped_in >= 17 && parity_in >= 17, "fit recovery");
}

void criterion10(Outcome& o, const EndToEnd& e) {
  const auto& shift = e.blockade_table.at("shift_over_h_Hz");
  bool decreasing = shift.size() > 1;
  for (std::size_t i = 1; i < shift.size(); ++i) {
    if (shift[i] > shift[i - 1] * (1 + 1e-3)) decreasing = false;
  }
  const auto& field = e.thermal_table.at("field_G");
  const auto& mean = e.thermal_table.at("p85_mean");
  bool increasing = true;
  double max_rel_diff = 0.0;
  const std::size_t half = mean.size() / 2;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (field[i] == field[i - 1] && mean[i] < mean[i - 1]) increasing = false;
  }
  if (half > 0 && mean.size() == 2 * half && field[0] != field[half]) {
    for (std::size_t i = 0; i < half; ++i) max_rel_diff = std::max(max_rel_diff, std::abs(mean[i] / mean[i + half] - 1));
  }
  const auto& fid = e.entangle.summary.at("fidelity");
  o.detail << e.seconds << " s; dE/h " << shift.front() / MHz << " -> " << shift.back() / MHz << " MHz over "
           << shift.size() << " offsets; <P85>(T) rising " << (increasing ? "yes" : "no") << ", B = 3 G vs 0 max rel. diff "
           << max_rel_diff << "; F_ent " << fid.at("F_ent").get<double>() << " (F_cnot "
           << fid.at("F_cnot").get<double>() << ")";
  o.check(e.seconds < 600, "runtime < 10 min");
  o.check(decreasing && shift.front() > 10 * shift.back(), "dE decreasing with y");
  o.check(increasing, "<P85> increasing with T");
  o.check(max_rel_diff > 0.05, "B = 3 G differs from B = 0");
}

}  // namespace

int main() {
  const auto start = Clock::now();
  std::vector<std::pair<std::string, std::function<void(Outcome&)>>> quick = {
      {"1 Doppler factor", criterion1},   {"2 fidelity bounds", criterion2},
      {"3 Bell fidelity formula", criterion3}, {"4 blockade-shift inversion", criterion4},
      {"5 effective Rabi frequency", criterion5}, {"6 thermal geometry", criterion6},
  };
  std::map<std::string, Outcome> results;
  for (auto& [name, fn] : quick) {
    try {
      fn(results[name]);
    } catch (const std::exception& ex) {
      results[name].check(false, ex.what());
    }
  }
  Outcome c7, c7p, c8, c9, c10;
  try {
    const EndToEnd e = run_end_to_end();
    criterion7(c7, c7p, e);
    criterion10(c10, e);
  } catch (const std::exception& ex) {
    c7.check(false, ex.what());
    c7p.check(false, ex.what());
    c10.check(false, ex.what());
  }
  try {
    criterion8(c8);
  } catch (const std::exception& ex) {
    c8.check(false, ex.what());
  }
  try {
    criterion9(c9);
  } catch (const std::exception& ex) {
    c9.check(false, ex.what());
  }

  bool ok = true;
  const auto print = [&](const std::string& name, const Outcome& o) {
    std::printf("criterion %-36s %s%s  %s\n", name.c_str(), o.pass ? "PASS" : "FAIL",
                o.gating ? "" : " (not gating)", o.detail.str().c_str());
    if (o.gating && !o.pass) ok = false;
  };
  for (auto& [name, fn] : quick) print(name, results[name]);
  print("7 calibration target <P85>", c7);
  print("7 property suite", c7p);
  print("8 ideal-limit protocol", c8);
  print("9 property suites", c9);
  print("10 end-to-end run", c10);
  std::printf("total %.1f s, %s\n", seconds_since(start), ok ? "all gating checks pass" : "GATING FAILURE");
  return ok ? 0 : 1;
}
