#include "rydgate/pair_hamiltonian.hpp"

#include <gsl/gsl_sf_coupling.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"
#include "rydgate/parallel.hpp"

namespace rydgate::pair {

namespace c = constants;
using cplx = std::complex<double>;

std::string to_string(const LevelFamily& f) {
  static constexpr char letters[] = "spdfghik";
  std::ostringstream os;
  os << f.n;
  if (f.l >= 0 && f.l < 8) {
    os << letters[f.l];
  } else {
    os << "l" << f.l;
  }
  os << atom::to_string(f.j);
  return os.str();
}

std::vector<FoersterChannel> default_channels() {
  const LevelFamily d79{79, 2, HalfInt{5}};
  return {
      {d79, d79},
      {{80, 1, HalfInt{3}}, {78, 3, HalfInt{5}}},
      {{80, 1, HalfInt{3}}, {78, 3, HalfInt{7}}},
      {{81, 1, HalfInt{3}}, {77, 3, HalfInt{5}}},
      {{81, 1, HalfInt{3}}, {77, 3, HalfInt{7}}},
  };
}

std::string PairState::label() const {
  return "|" + atom1.label() + " ; " + atom2.label() + ">";
}

std::string PairBasis::label(std::size_t index) const {
  if (index == bystander_index()) {
    return "|" + setup.atom1->name + " " + to_string(setup.rydberg) + " mj=" + atom::to_string(setup.rydberg_mj) +
           " ; " + setup.atom2->name + " ground>";
  }
  return states.at(index).label();
}

namespace {

std::vector<RydbergLevel> sublevels(const atom::SpeciesPtr& sp, const LevelFamily& f) {
  std::vector<RydbergLevel> out;
  for (int m2 = -f.j.twice; m2 <= f.j.twice; m2 += 2) {
    RydbergLevel lv{sp, f.n, f.l, f.j, HalfInt{m2}};
    lv.validate();
    out.push_back(lv);
  }
  return out;
}

}  // namespace

PairBasis build_pair_basis(const std::vector<FoersterChannel>& channels, const PairSetup& setup) {
  if (channels.empty()) throw InvalidInput("build_pair_basis: empty channel list");
  if (!setup.atom1 || !setup.atom2) throw InvalidInput("build_pair_basis: species not set");

  PairBasis basis;
  basis.setup = setup;
  std::set<FoersterChannel> seen_channels;
  std::set<std::tuple<LevelFamily, int, LevelFamily, int>> seen_states;

  auto add_ordering = [&](const LevelFamily& a, const LevelFamily& b) {
    for (const auto& la : sublevels(setup.atom1, a)) {
      for (const auto& lb : sublevels(setup.atom2, b)) {
        if (seen_states.emplace(a, la.mj.twice, b, lb.mj.twice).second) {
          basis.states.push_back(PairState{la, lb});
        }
      }
    }
  };

  for (const auto& ch : channels) {
    if (!seen_channels.insert(ch).second) continue;
    basis.channels.push_back(ch);
    add_ordering(ch.first, ch.second);
    if (ch.first != ch.second) add_ordering(ch.second, ch.first);
  }

  const RydbergLevel r1{setup.atom1, setup.rydberg.n, setup.rydberg.l, setup.rydberg.j, setup.rydberg_mj};
  const RydbergLevel r2{setup.atom2, setup.rydberg.n, setup.rydberg.l, setup.rydberg.j, setup.rydberg_mj};
  const auto it = std::find(basis.states.begin(), basis.states.end(), PairState{r1, r2});
  if (it == basis.states.end()) {
    throw InvalidInput("build_pair_basis: channels do not contain the doubly excited reference state");
  }
  basis.reference_index = static_cast<std::size_t>(it - basis.states.begin());
  return basis;
}

void Geometry::validate() const {
  if (!(z > 0.0) || !std::isfinite(y)) {
    if (z == 0.0 && y == 0.0) throw DomainError("singular geometry: R = 0");
    throw DomainError("geometry requires z > 0");
  }
}

double Geometry::separation() const { return std::hypot(y, z); }

double Geometry::cos_theta() const {
  const double r = separation();
  if (!(r > 0.0)) throw DomainError("singular geometry: R = 0");
  return y / r;
}

double Geometry::theta() const { return std::acos(std::clamp(cos_theta(), -1.0, 1.0)); }

double InteractionMatrix::hermiticity_defect() const {
  const double scale = matrix.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() / scale;
}

namespace {

// Y_{2 mu}(theta, phi), Condon-Shortley phase.
cplx spherical_harmonic_2(int mu, double theta, double phi) {
  const double ct = std::cos(theta), st = std::sin(theta);
  switch (mu) {
    case 0:
      return std::sqrt(5.0 / (16.0 * c::pi)) * (3.0 * ct * ct - 1.0);
    case 1:
      return -std::sqrt(15.0 / (8.0 * c::pi)) * st * ct * std::polar(1.0, phi);
    case -1:
      return std::sqrt(15.0 / (8.0 * c::pi)) * st * ct * std::polar(1.0, -phi);
    case 2:
      return std::sqrt(15.0 / (32.0 * c::pi)) * st * st * std::polar(1.0, 2.0 * phi);
    case -2:
      return std::sqrt(15.0 / (32.0 * c::pi)) * st * st * std::polar(1.0, -2.0 * phi);
    default:
      return 0.0;
  }
}

// <1 q1 1 q2 | 2 q1+q2>
double rank2_clebsch(int q1, int q2) {
  const int mu = q1 + q2;
  const double sign = (mu % 2 == 0) ? 1.0 : -1.0;
  return sign * std::sqrt(5.0) * gsl_sf_coupling_3j(2, 2, 4, 2 * q1, 2 * q2, -2 * mu);
}

const double kRank2Prefactor = -std::sqrt(24.0 * c::pi / 5.0);

}  // namespace

std::array<std::array<cplx, 3>, 3> dipole_dipole_weights(double theta, double phi) {
  std::array<std::array<cplx, 3>, 3> w{};
  for (int q1 = -1; q1 <= 1; ++q1) {
    for (int q2 = -1; q2 <= 1; ++q2) {
      w[q1 + 1][q2 + 1] = kRank2Prefactor * std::conj(spherical_harmonic_2(q1 + q2, theta, phi)) * rank2_clebsch(q1, q2);
    }
  }
  return w;
}

std::complex<double> dipole_dipole_element(const PairState& s1, const PairState& s2, const Geometry& g) {
  g.validate();
  const double r = g.separation();
  const auto w = dipole_dipole_weights(g.theta(), g.phi());
  cplx sum = 0.0;
  for (int q1 = -1; q1 <= 1; ++q1) {
    const double d1 = atom::dipole_matrix_element(s2.atom1, s1.atom1, q1);
    if (d1 == 0.0) continue;
    for (int q2 = -1; q2 <= 1; ++q2) {
      const double d2 = atom::dipole_matrix_element(s2.atom2, s1.atom2, q2);
      if (d2 == 0.0) continue;
      sum += w[q1 + 1][q2 + 1] * d1 * d2;
    }
  }
  return sum / (4.0 * c::pi * c::vacuum_permittivity * r * r * r);
}

FoersterModel::FoersterModel(PairBasis basis) : basis_(std::move(basis)) {
  const std::size_t n = basis_.foerster_size();
  const std::size_t dim = basis_.dimension();
  const auto& setup = basis_.setup;

  const RydbergLevel ref1{setup.atom1, setup.rydberg.n, setup.rydberg.l, setup.rydberg.j, setup.rydberg_mj};
  const RydbergLevel ref2{setup.atom2, setup.rydberg.n, setup.rydberg.l, setup.rydberg.j, setup.rydberg_mj};
  const double reference = atom::level_energy(ref1) + atom::level_energy(ref2);
  const atom::FieldConfig unit_field{1.0};

  defects_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  zeeman_per_gauss_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = basis_.states[i];
    defects_[static_cast<Eigen::Index>(i)] =
        (atom::level_energy(s.atom1) + atom::level_energy(s.atom2) - reference) / c::hbar;
    zeeman_per_gauss_[static_cast<Eigen::Index>(i)] =
        (atom::zeeman_shift(s.atom1, unit_field) + atom::zeeman_shift(s.atom2, unit_field)) / c::hbar;
  }
  defects_[static_cast<Eigen::Index>(basis_.reference_index)] = 0.0;

  // Single-atom dipole tables <a'| d_q |a> over the distinct levels of each atom.
  auto index_levels = [&](bool first) {
    std::map<RydbergLevel, std::size_t> idx;
    for (const auto& s : basis_.states) idx.emplace(first ? s.atom1 : s.atom2, 0);
    std::size_t k = 0;
    for (auto& [lv, v] : idx) v = k++;
    return idx;
  };
  const auto idx1 = index_levels(true);
  const auto idx2 = index_levels(false);
  auto dipole_table = [](const std::map<RydbergLevel, std::size_t>& idx) {
    std::array<Eigen::MatrixXd, 3> t;
    const auto m = static_cast<Eigen::Index>(idx.size());
    for (auto& mat : t) mat = Eigen::MatrixXd::Zero(m, m);
    for (const auto& [bra, i] : idx) {
      for (const auto& [ket, k] : idx) {
        for (int q = -1; q <= 1; ++q) {
          t[q + 1](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = atom::dipole_matrix_element(ket, bra, q);
        }
      }
    }
    return t;
  };
  const auto d1 = dipole_table(idx1);
  const auto d2 = dipole_table(idx2);

  std::vector<std::size_t> a1(n), a2(n);
  for (std::size_t i = 0; i < n; ++i) {
    a1[i] = idx1.at(basis_.states[i].atom1);
    a2[i] = idx2.at(basis_.states[i].atom2);
  }

  const double scale = kRank2Prefactor / (4.0 * c::pi * c::vacuum_permittivity * c::hbar);
  for (auto& m : rank2_) m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (int q1 = -1; q1 <= 1; ++q1) {
    for (int q2 = -1; q2 <= 1; ++q2) {
      const double cg = rank2_clebsch(q1, q2) * scale;
      Eigen::MatrixXd& target = rank2_[static_cast<std::size_t>(q1 + q2 + 2)];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          const double x1 = d1[q1 + 1](static_cast<Eigen::Index>(a1[i]), static_cast<Eigen::Index>(a1[k]));
          if (x1 == 0.0) continue;
          const double x2 = d2[q2 + 1](static_cast<Eigen::Index>(a2[i]), static_cast<Eigen::Index>(a2[k]));
          if (x2 == 0.0) continue;
          target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += cg * x1 * x2;
        }
      }
    }
  }
}

InteractionMatrix FoersterModel::hamiltonian(const Geometry& g, const atom::FieldConfig& field) const {
  g.validate();
  field.validate();
  const double r = g.separation();
  const double inv_r3 = 1.0 / (r * r * r);
  const double theta = g.theta();
  const auto dim = static_cast<Eigen::Index>(basis_.dimension());

  InteractionMatrix out;
  out.geometry = g;
  out.field_gauss = field.magnetic_field_gauss;
  out.channels = basis_.channels;
  out.matrix = Eigen::MatrixXcd::Zero(dim, dim);
  for (int mu = -2; mu <= 2; ++mu) {
    const cplx weight = std::conj(spherical_harmonic_2(mu, theta, g.phi())) * inv_r3;
    out.matrix += weight * rank2_[static_cast<std::size_t>(mu + 2)].cast<cplx>();
  }
  out.matrix.diagonal() = (defects_ + field.magnetic_field_gauss * zeeman_per_gauss_).cast<cplx>();
  out.matrix.diagonal()[static_cast<Eigen::Index>(basis_.bystander_index())] = 0.0;
  return out;
}

InteractionMatrix build_foerster_hamiltonian(const PairBasis& basis, const Geometry& g, const atom::FieldConfig& field) {
  return FoersterModel(basis).hamiltonian(g, field);
}

InteractionMatrix build_excitation_coupling(const PairBasis& basis, double omega85) {
  if (!(omega85 >= 0.0)) throw DomainError("excitation Rabi frequency must be non-negative");
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  InteractionMatrix out;
  out.channels = basis.channels;
  out.matrix = Eigen::MatrixXcd::Zero(dim, dim);
  if (omega85 > 0.0) {
    const auto b = static_cast<Eigen::Index>(basis.bystander_index());
    const auto r = static_cast<Eigen::Index>(basis.reference_index);
    out.matrix(b, r) = 0.5 * omega85;
    out.matrix(r, b) = 0.5 * omega85;
  }
  return out;
}

Eigen::MatrixXcd blockade_hamiltonian(const PairBasis& basis, const InteractionMatrix& foerster,
                                      const InteractionMatrix& coupling) {
  if (foerster.dimension() != basis.dimension() || coupling.dimension() != basis.dimension()) {
    throw InvalidInput("blockade_hamiltonian: dimension mismatch");
  }
  Eigen::MatrixXcd h = foerster.matrix + coupling.matrix;
  const auto b = static_cast<Eigen::Index>(basis.bystander_index());
  const auto r = static_cast<Eigen::Index>(basis.reference_index);
  h(b, b) += foerster.matrix(r, r).real();
  return h;
}

SurvivalSpectrum::SurvivalSpectrum(const Eigen::MatrixXcd& hamiltonian, std::size_t initial_index)
    : initial_(initial_index) {
  if (hamiltonian.rows() != hamiltonian.cols() || initial_index >= static_cast<std::size_t>(hamiltonian.rows())) {
    throw InvalidInput("SurvivalSpectrum: bad matrix shape or initial index");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(hamiltonian);
  if (solver.info() != Eigen::Success) {
    const double scale = hamiltonian.cwiseAbs().maxCoeff();
    const double asym = (hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff();
    std::ostringstream os;
    os << "eigendecomposition failed (dimension " << hamiltonian.rows() << ", max|H| " << scale
       << " rad/s, max|H - H^+| " << asym << ")";
    throw NumericalError(os.str());
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
  weights_ = eigenvectors_.row(static_cast<Eigen::Index>(initial_)).cwiseAbs2().transpose();
}

double SurvivalSpectrum::excitation_probability(double t) const {
  cplx amp = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) amp += weights_[k] * std::polar(1.0, -eigenvalues_[k] * t);
  return std::clamp(1.0 - std::norm(amp), 0.0, 1.0);
}

double SurvivalSpectrum::time_average(double window, std::size_t n_samples) const {
  if (!(window > 0.0)) throw DomainError("time average window must be positive");
  if (n_samples < 100) throw DomainError("time average needs at least 100 samples");
  double sum = 0.0;
  const double dt = window / static_cast<double>(n_samples - 1);
  for (std::size_t i = 0; i < n_samples; ++i) sum += excitation_probability(dt * static_cast<double>(i));
  return sum / static_cast<double>(n_samples);
}

double SurvivalSpectrum::infinite_time_average() const {
  const double scale = std::max(1.0, eigenvalues_.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;
  double survival = 0.0;
  Eigen::Index k = 0;
  while (k < eigenvalues_.size()) {
    double group = 0.0;
    const double start = eigenvalues_[k];
    while (k < eigenvalues_.size() && eigenvalues_[k] - start <= tol) group += weights_[k++];
    survival += group * group;
  }
  return std::clamp(1.0 - survival, 0.0, 1.0);
}

Eigen::VectorXcd SurvivalSpectrum::evolve(double t) const {
  Eigen::VectorXcd coeffs = eigenvectors_.row(static_cast<Eigen::Index>(initial_)).adjoint();
  for (Eigen::Index k = 0; k < coeffs.size(); ++k) coeffs[k] *= std::polar(1.0, -eigenvalues_[k] * t);
  return eigenvectors_ * coeffs;
}

double double_excitation_probability(const Eigen::MatrixXcd& hamiltonian, std::size_t initial_index, double t) {
  if (t == 0.0) return 0.0;
  return SurvivalSpectrum(hamiltonian, initial_index).excitation_probability(t);
}

double time_averaged_probability(const Eigen::MatrixXcd& hamiltonian, std::size_t initial_index, double window,
                                 std::size_t n_samples) {
  if (!(window > 0.0)) throw DomainError("time average window must be positive");
  if (n_samples < 100) throw DomainError("time average needs at least 100 samples");
  return SurvivalSpectrum(hamiltonian, initial_index).time_average(window, n_samples);
}

double blockade_shift(double p85, double omega85) {
  if (!(p85 > 0.0)) throw DomainError("blockade_shift: P85 must be positive");
  if (p85 > 1.0) throw DomainError("blockade_shift: P85 must not exceed 1");
  return c::hbar * omega85 * std::sqrt(1.0 / p85 - 1.0);
}

double probability_from_shift(double shift, double omega85) {
  const double a = c::hbar * omega85;
  return a * a / (a * a + shift * shift);
}

BlockadeScan blockade_scan(const FoersterModel& model, double z, const std::vector<double>& y_grid,
                           const atom::FieldConfig& field, double omega85, const TimeAverageOptions& options,
                           unsigned jobs) {
  if (y_grid.empty()) throw InvalidInput("blockade_scan: empty y grid");
  if (!(omega85 > 0.0)) throw DomainError("blockade_scan: Omega85 must be positive");
  for (std::size_t i = 0; i < y_grid.size(); ++i) {
    if (!(y_grid[i] >= 0.0)) throw DomainError("blockade_scan: y grid must be non-negative");
    if (i > 0 && y_grid[i] < y_grid[i - 1]) throw DomainError("blockade_scan: y grid must be sorted");
  }
  const InteractionMatrix coupling = build_excitation_coupling(model.basis(), omega85);
  const double window = options.window_rabi_periods * c::two_pi / omega85;

  BlockadeScan scan;
  scan.basis_size = model.basis().dimension();
  scan.points = parallel_map(y_grid.size(), jobs, [&](std::size_t i) {
    const Geometry g{z, y_grid[i]};
    const Eigen::MatrixXcd h = blockade_hamiltonian(model.basis(), model.hamiltonian(g, field), coupling);
    const SurvivalSpectrum spectrum(h, model.basis().bystander_index());
    BlockadePoint p;
    p.y = y_grid[i];
    p.p85 = spectrum.time_average(window, options.samples);
    p.p85_closed_form = spectrum.infinite_time_average();
    p.shift = blockade_shift(p.p85, omega85);
    return p;
  });

  // Soft check: beyond y = 2z the shift should fall off.
  for (std::size_t i = 1; i < scan.points.size(); ++i) {
    if (scan.points[i - 1].y >= 2.0 * z && scan.points[i].shift > scan.points[i - 1].shift) {
      scan.shift_decreasing_tail = false;
    }
  }
  return scan;
}

}  // namespace rydgate::pair
