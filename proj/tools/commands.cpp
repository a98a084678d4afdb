#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "rydgate/analysis.hpp"
#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"

#ifndef RYDGATE_VERSION
#define RYDGATE_VERSION "0.0.0"
#endif

namespace rydgate::cli {

namespace c = constants;
using nlohmann::json;

namespace {

// Fixed stream offsets keep the per-point seeds of different commands apart.
constexpr std::uint64_t kStreamDemo = 1000;
constexpr std::uint64_t kStreamCnot = 2000;
constexpr std::uint64_t kStreamEntangle = 3000;
constexpr std::uint64_t kStreamThermal = 4000;

struct Species {
  atom::SpeciesTable table;
  atom::SpeciesPtr control;
  atom::SpeciesPtr target;
};

Species load_species(const RunConfig& cfg) {
  Species s{atom::SpeciesTable::load(cfg.species_data), nullptr, nullptr};
  s.control = s.table.get(cfg.control);
  s.target = s.table.get(cfg.target);
  return s;
}

pair::FoersterModel build_model(const RunConfig& cfg, const Species& sp) {
  pair::PairSetup setup{sp.control, sp.target, cfg.rydberg, cfg.rydberg_mj};
  return pair::FoersterModel(pair::build_pair_basis(cfg.channels, setup));
}

thermal::OffsetDistribution offsets(const RunConfig& cfg, const Species& sp, double t87, double t85) {
  return thermal::OffsetDistribution::from(thermal::ThermalState{t87, t85, sp.control->mass, sp.target->mass}, cfg.trap);
}

thermal::P85Curve p85_curve(const RunConfig& cfg, const pair::FoersterModel& model, double field) {
  return thermal::tabulate_p85(model, cfg.z, cfg.p85_y_max, cfg.p85_points, atom::FieldConfig{field}, cfg.omega85,
                               cfg.time_average, cfg.jobs);
}

double node_probability(double shift, double omega85) {
  return std::isinf(shift) ? 0.0 : pair::probability_from_shift(shift, omega85);
}

// Error model with the blockade distribution resolved.
gate::ErrorModel resolve_error_model(const RunConfig& cfg, json& notes) {
  gate::ErrorModel em = cfg.error_model;
  const Species sp = load_species(cfg);
  em.doppler.mass = sp.control->mass;
  switch (cfg.blockade) {
    case BlockadeMode::perfect:
      em.blockade = {gate::ShiftNode{}};
      break;
    case BlockadeMode::none:
      em.blockade = {gate::ShiftNode{0.0, 1.0}};
      break;
    case BlockadeMode::fixed:
      em.blockade = {gate::ShiftNode{cfg.fixed_shift, 1.0}};
      break;
    case BlockadeMode::thermal: {
      const pair::FoersterModel model = build_model(cfg, sp);
      const auto curve = p85_curve(cfg, model, cfg.field_gauss);
      const auto dist = offsets(cfg, sp, cfg.t87, cfg.t85);
      em.blockade = gate::blockade_shift_nodes(curve, dist, cfg.omega85, cfg.blockade_nodes);
      double mean_p = 0.0;
      for (const auto& n : em.blockade) mean_p += n.weight * node_probability(n.shift, cfg.omega85);
      notes["thermal_p85_mean"] = mean_p;
      notes["offset_sigma_m"] = dist.sigma;
      break;
    }
  }
  em.validate();
  return em;
}

std::uint64_t point_seed(const RunConfig& cfg, std::uint64_t stream) {
  thermal::Rng rng = thermal::make_rng(cfg.seed, stream);
  return rng();
}

std::string csv_cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "nan";
  return v.dump();
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

double doppler_factor(const gate::ErrorModel& em) {
  if (!em.doppler.enabled) return 1.0;
  return thermal::doppler_dephasing_factor(em.doppler.temperature, em.doppler.mass, em.doppler.dt, em.doppler.lambda1,
                                           em.doppler.lambda2);
}

// Logical cells of one run, exact or from shots.
std::array<double, 4> run_cells(const RunConfig& cfg, const gate::SequenceSpec& seq, const gate::TwoAtomState& initial,
                                const gate::ErrorModel& em, std::uint64_t stream) {
  if (cfg.mode == SimulationMode::exact) return gate::run_sequence(seq, initial, em, cfg.exact).readout.cells(seq.measurement);
  const gate::SampledOptions opt{cfg.shots, point_seed(cfg, stream), cfg.jobs};
  return gate::run_sequence(seq, initial, em, opt).frequencies.cells(seq.measurement);
}

json cells_json(const std::array<double, 4>& v) { return json::array({v[0], v[1], v[2], v[3]}); }

}  // namespace

json metadata(const Context& ctx, const std::string& command) {
  return json{{"program", "rydgate"},
              {"version", RYDGATE_VERSION},
              {"command", command},
              {"config", ctx.cfg.source.string()},
              {"config_hash", ctx.cfg.config_hash},
              {"seed", ctx.cfg.seed}};
}

std::filesystem::path write_table(const Context& ctx, const std::string& command, const Table& table) {
  std::filesystem::create_directories(ctx.cfg.output_dir);
  const bool csv = ctx.format == OutputFormat::csv;
  const auto path = ctx.cfg.output_dir / (table.name + (csv ? ".csv" : ".json"));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  if (csv) {
    const json meta = metadata(ctx, command);
    out << "# rydgate " << meta["version"].get<std::string>() << " command=" << command
        << " config_hash=" << ctx.cfg.config_hash << " seed=" << ctx.cfg.seed << "\n";
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
      out << "\n";
    }
  } else {
    json rows = json::array();
    for (const auto& row : table.rows) {
      json r = json::object();
      for (std::size_t i = 0; i < row.size(); ++i) r[table.columns[i]] = row[i];
      rows.push_back(r);
    }
    out << json{{"metadata", metadata(ctx, command)}, {"rows", rows}}.dump(2) << "\n";
  }
  return path;
}

std::filesystem::path write_json(const Context& ctx, const std::string& command, const std::string& name,
                                 const json& body) {
  std::filesystem::create_directories(ctx.cfg.output_dir);
  const auto path = ctx.cfg.output_dir / (name + ".json");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  json doc = body;
  doc["metadata"] = metadata(ctx, command);
  out << doc.dump(2) << "\n";
  return path;
}

CommandOutput cmd_structure(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Species sp = load_species(cfg);
  const atom::FieldConfig field{cfg.field_gauss};

  // Level families of each atom appearing in the channels.
  std::set<pair::LevelFamily> families;
  for (const auto& ch : cfg.channels) {
    families.insert(ch.first);
    families.insert(ch.second);
  }
  Table levels{"structure_levels",
               {"species", "level", "n", "l", "j", "n_eff", "energy_J", "energy_over_h_Hz", "g_j", "zeeman_max_mj_J"},
               {}};
  for (const auto& s : {sp.control, sp.target}) {
    for (const auto& f : families) {
      const atom::RydbergLevel lv{s, f.n, f.l, f.j, f.j};
      const double e = atom::level_energy(lv);
      levels.rows.push_back({s->name, pair::to_string(f), f.n, f.l, f.j.value(), atom::effective_principal_number(lv), e,
                             e / c::planck, atom::lande_g(f.l, f.j), atom::zeeman_shift(lv, field)});
    }
  }

  // Radial and stretched-state dipole elements from |r> to each partner level.
  Table dipoles{"structure_dipoles", {"species", "from", "to", "radial_m", "radial_a0", "dipole_max_abs_C_m"}, {}};
  for (const auto& s : {sp.control, sp.target}) {
    const atom::RydbergLevel r{s, cfg.rydberg.n, cfg.rydberg.l, cfg.rydberg.j, cfg.rydberg_mj};
    std::set<pair::LevelFamily> partners;
    for (const auto& ch : cfg.channels) {
      for (const auto* f : {&ch.first, &ch.second}) {
        if (std::abs(f->l - cfg.rydberg.l) == 1) partners.insert(*f);
      }
    }
    for (const auto& f : partners) {
      double best = 0.0;
      for (int m2 = -f.j.twice; m2 <= f.j.twice; m2 += 2) {
        const atom::RydbergLevel b{s, f.n, f.l, f.j, atom::HalfInt{m2}};
        for (int q = -1; q <= 1; ++q) best = std::max(best, std::abs(atom::dipole_matrix_element(r, b, q)));
      }
      const atom::RydbergLevel b{s, f.n, f.l, f.j, f.j};
      const double radial = atom::radial_matrix_element(r, b);
      dipoles.rows.push_back({s->name, pair::to_string(cfg.rydberg), pair::to_string(f), radial, radial / c::bohr_radius, best});
    }
  }

  CommandOutput out;
  out.files.push_back(write_table(ctx, "structure", levels));
  out.files.push_back(write_table(ctx, "structure", dipoles));
  const pair::FoersterModel model = build_model(cfg, sp);
  out.summary = {{"species_version", sp.table.version()},
                 {"pair_basis_size", model.basis().foerster_size()},
                 {"levels", levels.rows.size()}};
  return out;
}

CommandOutput cmd_blockade(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Species sp = load_species(cfg);
  const pair::FoersterModel model = build_model(cfg, sp);
  const auto scan = pair::blockade_scan(model, cfg.z, cfg.y_grid, atom::FieldConfig{cfg.field_gauss}, cfg.omega85,
                                        cfg.time_average, cfg.jobs);
  Table t{"blockade", {"y_m", "p85", "p85_infinite_time", "shift_J", "shift_over_h_Hz"}, {}};
  for (const auto& p : scan.points) t.rows.push_back({p.y, p.p85, p.p85_closed_form, p.shift, p.shift / c::planck});
  CommandOutput out;
  out.files.push_back(write_table(ctx, "blockade", t));
  out.summary = {{"basis_size", scan.basis_size},
                 {"points", scan.points.size()},
                 {"shift_decreasing_tail", scan.shift_decreasing_tail},
                 {"field_G", cfg.field_gauss},
                 {"z_m", cfg.z}};
  if (!scan.points.empty()) out.summary["shift_over_h_Hz_first"] = scan.points.front().shift / c::planck;
  return out;
}

CommandOutput cmd_thermal(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Species sp = load_species(cfg);
  const pair::FoersterModel model = build_model(cfg, sp);
  std::vector<double> fields{cfg.field_gauss};
  if (cfg.field_gauss != 0.0) fields.push_back(0.0);

  Table t{"thermal", {"field_G", "temperature_K", "offset_sigma_m", "p85_mean"}, {}};
  json at_config = json::array();
  std::uint64_t stream = kStreamThermal;
  for (double field : fields) {
    const auto curve = p85_curve(cfg, model, field);
    const auto f = [&](double y) { return curve(y); };
    for (double temp : cfg.temperature_sweep) {
      // Both atoms at the sweep temperature.
      const auto dist = offsets(cfg, sp, temp, temp);
      const double v = thermal::thermal_average(f, dist, thermal::AverageMethod::quadrature, cfg.thermal_nodes).value;
      t.rows.push_back({field, temp, dist.sigma, v});
    }
    const auto dist = offsets(cfg, sp, cfg.t87, cfg.t85);
    const double q = thermal::thermal_average(f, dist, thermal::AverageMethod::quadrature, cfg.thermal_nodes).value;
    const auto mc = thermal::thermal_average(f, dist, thermal::AverageMethod::monte_carlo, 100000, point_seed(cfg, stream++),
                                             cfg.jobs);
    at_config.push_back({{"field_G", field},
                         {"p85_mean", q},
                         {"p85_mean_mc", mc.value},
                         {"p85_mean_mc_std_error", mc.std_error},
                         {"offset_sigma_m", dist.sigma}});
  }
  CommandOutput out;
  out.files.push_back(write_table(ctx, "thermal", t));
  out.summary = {{"configured_temperatures", at_config}};
  return out;
}

CommandOutput cmd_blockade_demo(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  json notes = json::object();
  const gate::ErrorModel em = resolve_error_model(cfg, notes);
  const auto grid = linspace(0.0, cfg.demo_t_max, cfg.demo_points);
  auto with = gate::blockade_demo(grid, true, em, cfg.rabi, cfg.exact);
  auto without = gate::blockade_demo(grid, false, em, cfg.rabi, cfg.exact);

  // Sampled mode: binomial counts of the configured number of shots per
  // point around the exact survival probability.
  std::vector<double> err_with(grid.size(), 0.0), err_without(grid.size(), 0.0);
  if (cfg.mode == SimulationMode::sampled) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (auto* curve : {&with, &without}) {
        thermal::Rng rng = thermal::make_rng(cfg.seed, kStreamDemo + 2 * i + (curve == &with ? 0 : 1));
        std::binomial_distribution<std::size_t> shots(cfg.shots, std::clamp(curve->survival[i], 0.0, 1.0));
        const double p = static_cast<double>(shots(rng)) / static_cast<double>(cfg.shots);
        curve->survival[i] = p;
        const double se = std::sqrt(std::max(p * (1 - p), 1.0 / cfg.shots) / static_cast<double>(cfg.shots));
        (curve == &with ? err_with : err_without)[i] = se;
      }
    }
    for (auto* curve : {&with, &without}) {
      const auto [lo, hi] = std::minmax_element(curve->survival.begin(), curve->survival.end());
      curve->peak_to_peak = *hi - *lo;
    }
  }

  Table t{"blockade_demo", {"t_s", "survival_without_control", "survival_with_control"}, {}};
  for (std::size_t i = 0; i < grid.size(); ++i) t.rows.push_back({grid[i], without.survival[i], with.survival[i]});

  auto fit_curve = [&](const gate::BlockadeDemoCurve& curve, const std::vector<double>& err) {
    analysis::TimeSeries ts{curve.t, curve.survival, {}};
    if (cfg.mode == SimulationMode::sampled) ts.sigma = err;
    return analysis::to_json(analysis::fit_damped_sinusoid(ts));
  };
  CommandOutput out;
  out.files.push_back(write_table(ctx, "blockade-demo", t));
  out.summary = {{"peak_to_peak_without_control", without.peak_to_peak},
                 {"peak_to_peak_with_control", with.peak_to_peak},
                 {"fit_without_control", fit_curve(without, err_without)},
                 {"fit_with_control", fit_curve(with, err_with)},
                 {"error_model", notes}};
  out.files.push_back(write_json(ctx, "blockade-demo", "blockade_demo_fit", out.summary));
  return out;
}

namespace {

gate::TruthTable truth_table(const RunConfig& cfg, const gate::ErrorModel& em, std::uint64_t stream) {
  if (cfg.mode == SimulationMode::exact) return gate::cnot_truth_table(0.0, em, cfg.rabi, cfg.exact);
  const gate::SequenceSpec seq = gate::cnot_sequence(0.0, cfg.rabi);
  gate::TruthTable table;
  for (int cbit = 0; cbit < 2; ++cbit) {
    for (int tbit = 0; tbit < 2; ++tbit) {
      const auto row = static_cast<std::size_t>(2 * cbit + tbit);
      const gate::SampledOptions opt{cfg.shots, point_seed(cfg, stream + row), cfg.jobs};
      const auto f = gate::run_sequence(seq, gate::TwoAtomState::basis(cbit, tbit), em, opt).frequencies;
      table.p[row] = f.cells(seq.measurement);
      table.loss[row] = f.loss;
    }
  }
  return table;
}

const char* kCellNames[4] = {"down_Down", "down_Up", "up_Down", "up_Up"};

}  // namespace

CommandOutput cmd_cnot(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  json notes = json::object();
  const gate::ErrorModel em = resolve_error_model(cfg, notes);

  Table scan{"cnot_phase_scan", {"phase_rad", "p_target_up_from_down_Up", "p_target_up_from_up_Up"}, {}};
  const std::size_t n = cfg.cnot_phase_points;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = c::two_pi * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto seq = gate::cnot_sequence(phase, cfg.rabi);
    const auto a = run_cells(cfg, seq, gate::TwoAtomState::basis(gate::kLower, gate::kUpper), em, kStreamCnot + 10 + 2 * i);
    const auto b = run_cells(cfg, seq, gate::TwoAtomState::basis(gate::kUpper, gate::kUpper), em, kStreamCnot + 11 + 2 * i);
    scan.rows.push_back({phase, a[1] + a[3], b[1] + b[3]});
  }

  const gate::TruthTable table = truth_table(cfg, em, kStreamCnot);
  Table tt{"cnot_truth_table", {"input", "p_down_Down", "p_down_Up", "p_up_Down", "p_up_Up", "p_loss"}, {}};
  for (std::size_t i = 0; i < 4; ++i) {
    tt.rows.push_back({kCellNames[i], table.p[i][0], table.p[i][1], table.p[i][2], table.p[i][3], table.loss[i]});
  }
  const double f = analysis::cnot_fidelity(table, gate::ideal_cnot_table());

  CommandOutput out;
  out.files.push_back(write_table(ctx, "cnot", scan));
  out.files.push_back(write_table(ctx, "cnot", tt));
  out.summary = {{"F_cnot", f}, {"mode", cfg.mode == SimulationMode::exact ? "exact" : "sampled"}, {"error_model", notes}};
  out.files.push_back(write_json(ctx, "cnot", "cnot_summary", out.summary));
  return out;
}

CommandOutput cmd_entangle(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  json notes = json::object();
  const gate::ErrorModel em = resolve_error_model(cfg, notes);
  const auto phis = linspace(0.0, c::pi, cfg.entangle_phi_points);
  const gate::TwoAtomState initial = gate::TwoAtomState::basis(gate::kUpper, gate::kLower);

  const auto bell_seq = gate::bell_sequence(false, 0.0, cfg.rabi);
  const auto bell = run_cells(cfg, bell_seq, initial, em, kStreamEntangle);
  Table scan{"entangle_parity", {"phi1_rad", "p_down_Down", "p_down_Up", "p_up_Down", "p_up_Up", "parity"}, {}};
  analysis::TimeSeries ts;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    const auto cells = run_cells(cfg, gate::bell_sequence(true, phis[i], cfg.rabi), initial, em, kStreamEntangle + 1 + i);
    const double parity = analysis::parity_from_populations(cells[3], cells[0], cells[2], cells[1]);
    scan.rows.push_back({phis[i], cells[0], cells[1], cells[2], cells[3], parity});
    ts.x.push_back(phis[i]);
    ts.y.push_back(parity);
  }
  const auto fit = analysis::fit_parity(ts);
  const gate::TruthTable table = truth_table(cfg, em, kStreamEntangle + 500);
  const double f_cnot = analysis::cnot_fidelity(table, gate::ideal_cnot_table());
  double sigma_uu = 0.0, sigma_dd = 0.0;
  if (cfg.mode == SimulationMode::sampled) {
    sigma_uu = std::sqrt(bell[3] * (1 - bell[3]) / static_cast<double>(cfg.shots));
    sigma_dd = std::sqrt(bell[0] * (1 - bell[0]) / static_cast<double>(cfg.shots));
  }
  const auto report = analysis::make_fidelity_report(f_cnot, bell[3], bell[0], fit, doppler_factor(em), sigma_uu, sigma_dd);

  CommandOutput out;
  out.files.push_back(write_table(ctx, "entangle", scan));
  out.summary = {{"fidelity", analysis::to_json(report)},
                 {"parity_fit", analysis::to_json(fit)},
                 {"bell_cells", cells_json(bell)},
                 {"error_model", notes}};
  out.files.push_back(write_json(ctx, "entangle", "entangle_report", out.summary));
  return out;
}

CommandOutput cmd_doppler(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Species sp = load_species(cfg);
  const auto& d = cfg.error_model.doppler;
  const double m = sp.control->mass;
  const double factor = thermal::doppler_dephasing_factor(d.temperature, m, d.dt, d.lambda1, d.lambda2);
  const auto mc = thermal::doppler_dephasing_mc(d.temperature, m, d.dt, d.lambda1, d.lambda2, cfg.doppler_mc_samples,
                                                cfg.seed, cfg.jobs);
  const auto bound = analysis::max_entanglement_fidelity(cfg.f_cnot_reference, factor);
  Table t{"doppler",
          {"temperature_K", "dt_s", "wavenumber_per_m", "velocity_sigma_m_per_s", "factor", "factor_mc", "factor_mc_std_error",
           "F_phase", "F_cnot", "F_ent_max"},
          {}};
  t.rows.push_back({d.temperature, d.dt, thermal::doppler_wavenumber(d.lambda1, d.lambda2),
                    thermal::doppler_velocity_sigma(d.temperature, m), factor, mc.value, mc.std_error, bound.f_phase,
                    cfg.f_cnot_reference, bound.f_bound});
  CommandOutput out;
  out.files.push_back(write_table(ctx, "doppler", t));
  out.summary = {{"factor", factor},
                 {"factor_mc", mc.value},
                 {"factor_mc_std_error", mc.std_error},
                 {"F_phase", bound.f_phase},
                 {"F_ent_max", bound.f_bound}};
  return out;
}

CommandOutput cmd_fit(const Context& ctx, const std::filesystem::path& data, const std::string& model) {
  const analysis::TimeSeries ts = analysis::read_csv(data);
  analysis::FitResult r;
  if (model == "damped") {
    analysis::FitOptions opt;
    opt.seed = ctx.cfg.seed;
    r = analysis::fit_damped_sinusoid(ts, opt);
  } else if (model == "parity") {
    r = analysis::fit_parity(ts);
  } else {
    throw ConfigError("unknown fit model '" + model + "' (expected damped or parity)");
  }
  CommandOutput out;
  out.summary = analysis::to_json(r);
  out.summary["input"] = data.string();
  out.files.push_back(write_json(ctx, "fit", "fit_" + model, out.summary));
  return out;
}

}  // namespace rydgate::cli
