#include "rydgate/atom_structure.hpp"

#include <gsl/gsl_sf_coupling.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"

namespace rydgate::atom {

namespace c = constants;

std::string to_string(HalfInt h) {
  if (h.twice % 2 == 0) return std::to_string(h.twice / 2);
  return std::to_string(h.twice) + "/2";
}

namespace {

constexpr char kSeriesLetters[] = "SPDFGHIKLMNOQRTUV";

std::string series_name(int l, HalfInt j) {
  std::string s;
  if (l >= 0 && l < static_cast<int>(sizeof(kSeriesLetters) - 1)) {
    s += kSeriesLetters[l];
  } else {
    s += "l=" + std::to_string(l);
  }
  return s + to_string(j);
}

}  // namespace

double Species::quantum_defect(int n, int l, HalfInt j) const {
  auto it = defects.find({l, j.twice});
  if (it == defects.end()) {
    throw ConfigError("species " + name + ": no quantum defect for the " + series_name(l, j) +
                      " series (l=" + std::to_string(l) + ", j=" + to_string(j) + ")");
  }
  const QuantumDefect& d = it->second;
  const double nd = n - d.delta0;
  return d.delta0 + d.delta2 / (nd * nd);
}

bool Species::is_hydrogenic(int l, HalfInt j) const {
  auto it = defects.find({l, j.twice});
  return it != defects.end() && it->second.delta0 == 0.0 && it->second.delta2 == 0.0;
}

void Species::validate() const {
  if (name.empty()) throw ConfigError("species entry without a name");
  if (!(mass > 0.0)) throw ConfigError("species " + name + ": mass must be positive");
  if (!(rydberg_constant > 0.0)) {
    throw ConfigError("species " + name + ": rydberg constant must be positive");
  }
  if (core_polarizability < 0.0) {
    throw ConfigError("species " + name + ": core polarizability must be non-negative");
  }
  for (const auto& [key, d] : defects) {
    if (d.delta0 < 0.0) {
      throw ConfigError("species " + name + ": negative delta0 for " +
                        series_name(key.first, HalfInt{key.second}));
    }
  }
  for (int l = 0; l <= 3; ++l) {
    const bool any = std::any_of(defects.begin(), defects.end(),
                                 [l](const auto& kv) { return kv.first.first == l; });
    if (!any) {
      throw ConfigError("species " + name + ": defect table must cover the s, p, d and f series (missing l=" +
                        std::to_string(l) + ")");
    }
  }
}

SpeciesTable SpeciesTable::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("species data is not valid JSON: ") + e.what());
  }

  SpeciesTable table;
  table.version_ = doc.value("version", std::string("unversioned"));
  const nlohmann::json entries = doc.contains("species") ? doc.at("species") : nlohmann::json::array({doc});
  try {
    for (const auto& entry : entries) {
      auto sp = std::make_shared<Species>();
      sp->name = entry.at("name").get<std::string>();
      sp->mass = entry.at("mass_u").get<double>() * c::atomic_mass_unit;
      sp->rydberg_constant = entry.at("rydberg_constant_1_per_m").get<double>();
      sp->core_polarizability = entry.value("core_polarizability_au", 0.0);
      for (const auto& d : entry.at("defects")) {
        const int l = d.at("l").get<int>();
        const int j2 = d.at("j2").get<int>();
        if (l < 0 || j2 <= 0 || std::abs(j2 - 2 * l) != 1) {
          throw ConfigError("species " + sp->name + ": invalid defect entry l=" + std::to_string(l) +
                            " j2=" + std::to_string(j2));
        }
        sp->defects[{l, j2}] = QuantumDefect{d.at("delta0").get<double>(), d.value("delta2", 0.0)};
      }
      sp->validate();
      table.species_[sp->name] = std::move(sp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("species data schema violation: ") + e.what());
  }
  if (table.species_.empty()) throw ConfigError("species data contains no species");
  return table;
}

SpeciesTable SpeciesTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open species data file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

SpeciesPtr SpeciesTable::get(const std::string& name) const {
  auto it = species_.find(name);
  if (it == species_.end()) throw ConfigError("unknown species " + name);
  return it->second;
}

std::vector<std::string> SpeciesTable::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : species_) out.push_back(k);
  return out;
}

void RydbergLevel::validate() const {
  if (!species) throw DomainError("level without species");
  if (l < 0 || n <= l) throw DomainError("invalid level: need n > l >= 0 (" + label() + ")");
  if (j.twice != 2 * l + 1 && !(l > 0 && j.twice == 2 * l - 1)) {
    throw DomainError("invalid level: j must be l +/- 1/2 (" + label() + ")");
  }
  if (std::abs(mj.twice) > j.twice || (mj.twice - j.twice) % 2 != 0) {
    throw DomainError("invalid level: |mj| <= j violated (" + label() + ")");
  }
}

std::string RydbergLevel::label() const {
  std::string s = species ? species->name + " " : std::string();
  return s + std::to_string(n) + series_name(l, j) + " mj=" + to_string(mj);
}

bool operator==(const RydbergLevel& a, const RydbergLevel& b) {
  return (a <=> b) == std::strong_ordering::equal;
}

std::strong_ordering operator<=>(const RydbergLevel& a, const RydbergLevel& b) {
  const std::string& na = a.species ? a.species->name : std::string();
  const std::string& nb = b.species ? b.species->name : std::string();
  if (auto cmp = na <=> nb; cmp != 0) return cmp;
  return std::tie(a.n, a.l, a.j.twice, a.mj.twice) <=> std::tie(b.n, b.l, b.j.twice, b.mj.twice);
}

void FieldConfig::validate() const {
  if (!(magnetic_field_gauss >= 0.0)) throw DomainError("magnetic field must be non-negative");
  const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (std::abs(norm - 1.0) > 1e-12) throw DomainError("quantization axis must be a unit vector");
}

double effective_principal_number(const RydbergLevel& level) {
  level.validate();
  return level.n - level.species->quantum_defect(level.n, level.l, level.j);
}

double level_energy(const RydbergLevel& level) {
  const double n_eff = effective_principal_number(level);
  if (!(n_eff > 0.0)) throw DomainError("n - delta must be positive for " + level.label());
  return -c::planck * c::speed_of_light * level.species->rydberg_constant / (n_eff * n_eff);
}

double RadialWavefunction::norm() const {
  // u^2 dr = x X^2 * 2x dx
  double sum = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    const double w = (k == 0 || k + 1 == size()) ? 0.5 : 1.0;
    sum += w * 2.0 * x(k) * x(k) * reduced[k] * reduced[k];
  }
  return sum * step;
}

RadialWavefunction radial_wavefunction(const Species& species, int n, int l, HalfInt j, double step) {
  if (!(step > 0.0)) throw DomainError("radial step must be positive");
  const double n_eff = n - species.quantum_defect(n, l, j);
  if (!(n_eff > 0.0)) throw DomainError("n - delta must be positive");
  const double energy = -0.5 / (n_eff * n_eff);  // hartree, pure Coulomb potential
  const bool hydrogenic = species.is_hydrogenic(l, j);

  const double r_outer = 2.0 * n * (n + 15.0);
  const auto last = static_cast<std::size_t>(std::ceil(std::sqrt(r_outer) / step));

  double r_cut = 0.0;
  if (!hydrogenic) {
    const double r_core = std::cbrt(species.core_polarizability);
    const double disc = n_eff * n_eff - l * (l + 1.0);
    const double r_turn = disc > 0.0 ? n_eff * n_eff - n_eff * std::sqrt(disc) : 0.0;
    r_cut = std::max(r_core, r_turn);
  }
  const auto first = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(r_cut) / step)));
  if (first + 2 >= last) {
    throw NumericalError("radial integration domain is empty for n=" + std::to_string(n) +
                         " l=" + std::to_string(l));
  }

  const double centrifugal = (2.0 * l + 0.5) * (2.0 * l + 1.5);
  auto kappa = [&](std::size_t i) {
    const double x = static_cast<double>(i) * step;
    const double x2 = x * x;
    return centrifugal / x2 + 8.0 * x2 * (-1.0 / x2 - energy);
  };

  const std::size_t count = last - first + 1;
  std::vector<double> X(count, 0.0);
  const double h2 = step * step / 12.0;
  X[count - 1] = 1e-30;
  X[count - 2] = 1e-30 * std::exp(step * std::sqrt(std::max(kappa(last), 0.0)));

  std::size_t stop = 0;  // local index where the solution is truncated
  double k_next = kappa(last);
  double k_cur = kappa(last - 1);
  for (std::size_t loc = count - 2; loc > 0; --loc) {
    const std::size_t i = first + loc;
    const double k_prev = kappa(i - 1);
    X[loc - 1] = (2.0 * X[loc] * (1.0 + 5.0 * h2 * k_cur) - X[loc + 1] * (1.0 - h2 * k_next)) /
                 (1.0 - h2 * k_prev);
    if (std::abs(X[loc - 1]) > 1e250) {
      for (std::size_t m = loc - 1; m < count; ++m) X[m] *= 1e-250;
    }
    // Inside the inner turning point a growing |u| means the irregular
    // solution has taken over.
    if (hydrogenic && k_prev > 0.0) {
      const double x_prev = static_cast<double>(i - 1) * step;
      const double x_cur = static_cast<double>(i) * step;
      if (std::abs(std::sqrt(x_prev) * X[loc - 1]) > std::abs(std::sqrt(x_cur) * X[loc]) &&
          x_prev * x_prev < 0.5 * n_eff * n_eff) {
        stop = loc;
        break;
      }
    }
    k_next = k_cur;
    k_cur = k_prev;
  }

  RadialWavefunction wf;
  wf.step = step;
  wf.first_index = first + stop;
  wf.reduced.assign(X.begin() + static_cast<std::ptrdiff_t>(stop), X.end());

  const double norm = wf.norm();
  if (!std::isfinite(norm) || !(norm > 0.0)) {
    throw NumericalError("radial normalization failed for n=" + std::to_string(n) + " l=" + std::to_string(l));
  }
  const double scale = 1.0 / std::sqrt(norm);
  for (double& v : wf.reduced) v *= scale;
  return wf;
}

RadialWavefunction radial_wavefunction(const RydbergLevel& level) {
  level.validate();
  return radial_wavefunction(*level.species, level.n, level.l, level.j);
}

namespace {

using RadialKey = std::tuple<std::string, int, int, int, int, int, int>;

struct RadialCache {
  std::mutex mutex;
  std::map<RadialKey, double> values;
};

RadialCache& radial_cache() {
  static RadialCache cache;
  return cache;
}

double radial_overlap_r(const RadialWavefunction& a, const RadialWavefunction& b) {
  // u_a r u_b dr = 2 x^4 X_a X_b dx on the shared grid.
  const std::size_t lo = std::max(a.first_index, b.first_index);
  const std::size_t hi = std::min(a.first_index + a.size(), b.first_index + b.size());
  if (hi <= lo) return 0.0;
  double sum = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double x = static_cast<double>(i) * a.step;
    const double w = (i == lo || i + 1 == hi) ? 0.5 : 1.0;
    const double x2 = x * x;
    sum += w * 2.0 * x2 * x2 * a.reduced[i - a.first_index] * b.reduced[i - b.first_index];
  }
  return sum * a.step;
}

}  // namespace

double radial_matrix_element(const RydbergLevel& a, const RydbergLevel& b) {
  a.validate();
  b.validate();
  if (a.species->name != b.species->name) {
    throw DomainError("radial matrix element between different species");
  }
  RadialKey key{a.species->name, a.n, a.l, a.j.twice, b.n, b.l, b.j.twice};
  RadialKey mirrored{a.species->name, b.n, b.l, b.j.twice, a.n, a.l, a.j.twice};
  if (mirrored < key) key = mirrored;

  RadialCache& cache = radial_cache();
  {
    std::lock_guard lock(cache.mutex);
    if (auto it = cache.values.find(key); it != cache.values.end()) return it->second;
  }
  const auto& [name, n1, l1, j1, n2, l2, j2] = key;
  const RadialWavefunction wa = radial_wavefunction(*a.species, n1, l1, HalfInt{j1});
  const RadialWavefunction wb = radial_wavefunction(*a.species, n2, l2, HalfInt{j2});
  const double value = radial_overlap_r(wa, wb) * c::bohr_radius;
  std::lock_guard lock(cache.mutex);
  cache.values.emplace(key, value);
  return value;
}

double angular_dipole_factor(int l_a, HalfInt j_a, HalfInt m_a, int l_b, HalfInt j_b, HalfInt m_b, int q) {
  if (std::abs(l_a - l_b) != 1) return 0.0;
  if (m_b.twice != m_a.twice + 2 * q) return 0.0;
  if (std::abs(j_a.twice - j_b.twice) > 2) return 0.0;
  if (q < -1 || q > 1) return 0.0;

  constexpr int two_s = 1;
  // <l_b || C^1 || l_a>
  const double l_reduced = ((l_b % 2 == 0) ? 1.0 : -1.0) * std::sqrt((2.0 * l_b + 1.0) * (2.0 * l_a + 1.0)) *
                           gsl_sf_coupling_3j(2 * l_b, 2, 2 * l_a, 0, 0, 0);
  // <(l_b s) j_b || C^1 || (l_a s) j_a>, spectator spin
  const int phase_j = (2 * l_b + two_s + j_a.twice + 2) / 2;
  const double j_reduced = ((phase_j % 2 == 0) ? 1.0 : -1.0) *
                           std::sqrt((j_a.twice + 1.0) * (j_b.twice + 1.0)) *
                           gsl_sf_coupling_6j(2 * l_b, j_b.twice, two_s, j_a.twice, 2 * l_a, 2) * l_reduced;
  // Wigner-Eckart
  const int phase_m = (j_b.twice - m_b.twice) / 2;
  return ((phase_m % 2 == 0) ? 1.0 : -1.0) *
         gsl_sf_coupling_3j(j_b.twice, 2, j_a.twice, -m_b.twice, 2 * q, m_a.twice) * j_reduced;
}

double dipole_matrix_element(const RydbergLevel& a, const RydbergLevel& b, int q) {
  a.validate();
  b.validate();
  const double angular = angular_dipole_factor(a.l, a.j, a.mj, b.l, b.j, b.mj, q);
  if (angular == 0.0) return 0.0;
  return c::elementary_charge * radial_matrix_element(a, b) * angular;
}

double lande_g(int l, HalfInt j) {
  const double jj = j.value() * (j.value() + 1.0);
  const double ll = l * (l + 1.0);
  constexpr double ss = 0.75;
  const double gs = c::electron_g_factor;
  return (jj + ll - ss) / (2.0 * jj) + gs * (jj - ll + ss) / (2.0 * jj);
}

double zeeman_shift(const RydbergLevel& level, const FieldConfig& field) {
  level.validate();
  return lande_g(level.l, level.j) * c::bohr_magneton * level.mj.value() * field.magnetic_field_gauss * c::gauss;
}

}  // namespace rydgate::atom
