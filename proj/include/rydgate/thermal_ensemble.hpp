#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "rydgate/pair_hamiltonian.hpp"

namespace rydgate::thermal {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream) via std::seed_seq.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

struct TrapParams {
  double omega_y = 0.0;  // rad/s, along the offset direction
  double omega_r = 0.0;  // rad/s

  void validate() const;
};

struct ThermalState {
  double t87 = 0.0;  // K
  double t85 = 0.0;  // K
  double m87 = 0.0;  // kg
  double m85 = 0.0;  // kg

  void validate() const;
};

// Relative offset y = y2 - y1 along the trap axis, before folding.
struct OffsetDistribution {
  double sigma = 0.0;          // m
  double reduced_mass = 0.0;   // kg
  double temperature = 0.0;    // K

  static OffsetDistribution from(const ThermalState& state, const TrapParams& trap);
};

double reduced_mass(double m1, double m2);
// m_red (T87/m87 + T85/m85)
double combined_temperature(const ThermalState& state);

// Nodes and weights for E[g(X)], X ~ N(0, 1); weights sum to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_hermite_normal(std::size_t n);
// Gauss-Legendre rule for the uniform distribution on [-1, 1]; weights sum to 1.
QuadratureRule gauss_legendre_uniform(std::size_t n);

enum class AverageMethod { quadrature, monte_carlo };

struct AverageResult {
  double value = 0.0;
  double std_error = 0.0;  // zero for quadrature
  std::size_t n = 0;
};

// <f(|y|)> over the signed Gaussian offset. Quadrature needs n >= 8 nodes,
// Monte Carlo n >= 1000 samples; otherwise InvalidInput. Monte Carlo draws in
// fixed chunks with per-chunk streams, so the result does not depend on jobs.
AverageResult thermal_average(const std::function<double(double)>& f, const OffsetDistribution& dist,
                              AverageMethod method, std::size_t n, std::uint64_t seed = 0, unsigned jobs = 1);

// |k| = 2 pi (1/lambda1 - 1/lambda2) for counter-propagating beams.
double doppler_wavenumber(double lambda1, double lambda2);

// The velocity spread along k entering the dephasing estimate: <v^2> = 2 k_B T / m.
double doppler_velocity_sigma(double temperature, double mass);

// exp(-k_B T |k|^2 dt^2 / m)
double doppler_dephasing_factor(double temperature, double mass, double dt, double lambda1, double lambda2);

// <cos(k v dt)> with v drawn from doppler_velocity_sigma.
AverageResult doppler_dephasing_mc(double temperature, double mass, double dt, double lambda1, double lambda2,
                                   std::size_t n, std::uint64_t seed, unsigned jobs = 1);

double sample_offset(const OffsetDistribution& dist, Rng& rng);
// One Cartesian component, standard deviation sqrt(k_B T / m).
double sample_velocity(double temperature, double mass, Rng& rng);

// Tabulated P85(y) with monotone cubic interpolation. Beyond the last node the
// blockade shift is continued as 1/R^3.
class P85Curve {
 public:
  P85Curve(std::vector<double> y, std::vector<double> p85, double z, double omega85);
  double operator()(double y) const;
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& p85() const { return p_; }

 private:
  std::vector<double> y_;
  std::vector<double> p_;
  double z_ = 0.0;
  double omega85_ = 0.0;
  double tail_c3_ = 0.0;  // dE * R^3 at the last node
  struct Interpolant;
  std::shared_ptr<const Interpolant> spline_;
};

// Runs blockade_scan on a uniform grid [0, y_max] and wraps it as a curve.
P85Curve tabulate_p85(const pair::FoersterModel& model, double z, double y_max, std::size_t n_points,
                      const atom::FieldConfig& field, double omega85, const pair::TimeAverageOptions& options = {},
                      unsigned jobs = 1);

}  // namespace rydgate::thermal
