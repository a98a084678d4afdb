#include "rydgate/thermal_ensemble.hpp"

#include <gsl/gsl_integration.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"
#include "rydgate/parallel.hpp"

namespace rydgate::thermal {

namespace c = constants;

namespace {

constexpr std::size_t kChunk = 8192;

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
};

// Chunked Monte Carlo: chunk i uses stream i, partial sums reduced in order.
template <class Draw>
AverageResult chunked_mean(std::size_t n, std::uint64_t seed, unsigned jobs, Draw draw) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const auto parts = parallel_map(chunks, jobs, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    Moments m;
    m.n = std::min(kChunk, n - i * kChunk);
    for (std::size_t k = 0; k < m.n; ++k) {
      const double v = draw(rng);
      m.sum += v;
      m.sum_sq += v * v;
    }
    return m;
  });
  Moments total;
  for (const auto& p : parts) {
    total.sum += p.sum;
    total.sum_sq += p.sum_sq;
    total.n += p.n;
  }
  const double nn = static_cast<double>(total.n);
  const double mean = total.sum / nn;
  const double var = std::max(0.0, (total.sum_sq - nn * mean * mean) / (nn - 1.0));
  return AverageResult{mean, std::sqrt(var / nn), total.n};
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be positive");
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

QuadratureRule gauss_hermite_normal(std::size_t n) {
  if (n == 0) throw InvalidInput("quadrature rule needs at least one node");
  // GSL weight exp(-x^2); X = sqrt(2) x.
  gsl_integration_fixed_workspace* w = gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
  if (w == nullptr) throw NumericalError("Gauss-Hermite rule allocation failed");
  QuadratureRule rule;
  const double* x = gsl_integration_fixed_nodes(w);
  const double* wt = gsl_integration_fixed_weights(w);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes.push_back(std::sqrt(2.0) * x[i]);
    rule.weights.push_back(wt[i] / std::sqrt(c::pi));
  }
  gsl_integration_fixed_free(w);
  return rule;
}

QuadratureRule gauss_legendre_uniform(std::size_t n) {
  if (n == 0) throw InvalidInput("quadrature rule needs at least one node");
  gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(n);
  if (t == nullptr) throw NumericalError("Gauss-Legendre rule allocation failed");
  QuadratureRule rule;
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0, w = 0.0;
    gsl_integration_glfixed_point(-1.0, 1.0, i, &x, &w, t);
    rule.nodes.push_back(x);
    rule.weights.push_back(0.5 * w);
  }
  gsl_integration_glfixed_table_free(t);
  return rule;
}

void TrapParams::validate() const {
  require_positive(omega_y, "trap frequency omega_y");
  require_positive(omega_r, "trap frequency omega_r");
}

void ThermalState::validate() const {
  require_positive(t87, "T87");
  require_positive(t85, "T85");
  require_positive(m87, "m87");
  require_positive(m85, "m85");
}

double reduced_mass(double m1, double m2) {
  require_positive(m1, "mass");
  require_positive(m2, "mass");
  return m1 * m2 / (m1 + m2);
}

double combined_temperature(const ThermalState& s) {
  s.validate();
  return reduced_mass(s.m87, s.m85) * (s.t87 / s.m87 + s.t85 / s.m85);
}

OffsetDistribution OffsetDistribution::from(const ThermalState& state, const TrapParams& trap) {
  trap.validate();
  OffsetDistribution d;
  d.reduced_mass = thermal::reduced_mass(state.m87, state.m85);
  d.temperature = combined_temperature(state);
  d.sigma = std::sqrt(c::boltzmann * d.temperature / (d.reduced_mass * trap.omega_y * trap.omega_y));
  return d;
}

AverageResult thermal_average(const std::function<double(double)>& f, const OffsetDistribution& dist,
                              AverageMethod method, std::size_t n, std::uint64_t seed, unsigned jobs) {
  if (!(dist.sigma >= 0.0)) throw InvalidInput("thermal_average: negative sigma");
  if (method == AverageMethod::quadrature) {
    if (n < 8) throw InvalidInput("thermal_average: quadrature needs at least 8 nodes");
    const QuadratureRule rule = gauss_hermite_normal(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += rule.weights[i] * f(std::abs(dist.sigma * rule.nodes[i]));
    return AverageResult{sum, 0.0, n};
  }
  if (n < 1000) throw InvalidInput("thermal_average: Monte Carlo needs at least 1000 samples");
  return chunked_mean(n, seed, jobs, [&](Rng& rng) { return f(std::abs(sample_offset(dist, rng))); });
}

double doppler_wavenumber(double lambda1, double lambda2) {
  require_positive(lambda1, "wavelength");
  require_positive(lambda2, "wavelength");
  if (!(lambda1 < lambda2)) throw DomainError("doppler: expects lambda1 < lambda2");
  return c::two_pi * (1.0 / lambda1 - 1.0 / lambda2);
}

double doppler_velocity_sigma(double temperature, double mass) {
  require_positive(mass, "mass");
  if (!(temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  return std::sqrt(2.0 * c::boltzmann * temperature / mass);
}

double doppler_dephasing_factor(double temperature, double mass, double dt, double lambda1, double lambda2) {
  if (!(dt >= 0.0)) throw DomainError("doppler: dt must be non-negative");
  const double k = doppler_wavenumber(lambda1, lambda2);
  const double sv = doppler_velocity_sigma(temperature, mass);
  return std::exp(-0.5 * k * k * sv * sv * dt * dt);
}

AverageResult doppler_dephasing_mc(double temperature, double mass, double dt, double lambda1, double lambda2,
                                   std::size_t n, std::uint64_t seed, unsigned jobs) {
  if (n < 1000) throw InvalidInput("doppler_dephasing_mc: needs at least 1000 samples");
  const double k = doppler_wavenumber(lambda1, lambda2);
  const double sv = doppler_velocity_sigma(temperature, mass);
  return chunked_mean(n, seed, jobs, [&](Rng& rng) {
    std::normal_distribution<double> v(0.0, sv);
    return std::cos(k * v(rng) * dt);
  });
}

double sample_offset(const OffsetDistribution& dist, Rng& rng) {
  std::normal_distribution<double> g(0.0, dist.sigma);
  return g(rng);
}

double sample_velocity(double temperature, double mass, Rng& rng) {
  require_positive(mass, "mass");
  std::normal_distribution<double> g(0.0, std::sqrt(c::boltzmann * temperature / mass));
  return g(rng);
}

struct P85Curve::Interpolant {
  gsl_spline* spline = nullptr;
  ~Interpolant() { gsl_spline_free(spline); }
};

P85Curve::P85Curve(std::vector<double> y, std::vector<double> p85, double z, double omega85)
    : y_(std::move(y)), p_(std::move(p85)), z_(z), omega85_(omega85) {
  if (y_.size() != p_.size() || y_.size() < 3) throw InvalidInput("P85Curve: need at least 3 matching nodes");
  require_positive(z_, "z");
  require_positive(omega85_, "Omega85");
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (i > 0 && !(y_[i] > y_[i - 1])) throw InvalidInput("P85Curve: y must be strictly increasing");
    if (!(p_[i] >= 0.0 && p_[i] <= 1.0)) throw InvalidInput("P85Curve: probabilities outside [0, 1]");
  }
  if (y_.front() != 0.0) throw InvalidInput("P85Curve: grid must start at y = 0");

  auto holder = std::make_shared<Interpolant>();
  holder->spline = gsl_spline_alloc(gsl_interp_steffen, y_.size());
  if (holder->spline == nullptr || gsl_spline_init(holder->spline, y_.data(), p_.data(), y_.size()) != 0) {
    throw NumericalError("P85Curve: spline setup failed");
  }
  spline_ = holder;

  const double r = std::hypot(z_, y_.back());
  const double p = std::max(p_.back(), 1e-300);
  tail_c3_ = pair::blockade_shift(std::min(p, 1.0), omega85_) * r * r * r;
}

double P85Curve::operator()(double y) const {
  y = std::abs(y);
  if (y <= y_.back()) return std::clamp(gsl_spline_eval(spline_->spline, y, nullptr), 0.0, 1.0);
  const double r = std::hypot(z_, y);
  return pair::probability_from_shift(tail_c3_ / (r * r * r), omega85_);
}

P85Curve tabulate_p85(const pair::FoersterModel& model, double z, double y_max, std::size_t n_points,
                      const atom::FieldConfig& field, double omega85, const pair::TimeAverageOptions& options,
                      unsigned jobs) {
  if (n_points < 3) throw InvalidInput("tabulate_p85: need at least 3 points");
  require_positive(y_max, "y_max");
  std::vector<double> grid(n_points);
  for (std::size_t i = 0; i < n_points; ++i) grid[i] = y_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
  const auto scan = pair::blockade_scan(model, z, grid, field, omega85, options, jobs);
  std::vector<double> p;
  p.reserve(n_points);
  for (const auto& pt : scan.points) p.push_back(pt.p85);
  return P85Curve(grid, p, z, omega85);
}

}  // namespace rydgate::thermal
