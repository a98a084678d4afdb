#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rydgate/gate_dynamics.hpp"

namespace rydgate::analysis {

// Abscissa (s or rad), measured values and optional per-point standard errors.
struct TimeSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sigma;  // empty: unweighted

  // Throws InvalidInput on mismatched lengths or values outside [lo, hi].
  void validate(double lo = -0.05, double hi = 1.05) const;
};

// Reads "x,y[,sigma]" rows; lines starting with '#' and a non-numeric header
// row are skipped.
TimeSeries read_csv(const std::string& path);

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> errors;            // 1 sigma, infinity if unidentifiable
  Eigen::MatrixXd covariance;
  std::vector<double> bootstrap_errors;  // empty unless requested
  double residual_norm = 0.0;            // sqrt(sum r^2), weighted if sigma given
  double reduced_chi2 = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> flags;

  bool authoritative() const { return converged; }
  bool has_flag(const std::string& f) const;
  double param(const std::string& name) const;
  double error(const std::string& name) const;
};

struct FitOptions {
  int max_iterations = 200;
  double relative_step = 1e-8;
  std::size_t bootstrap = 0;  // resamples; 0 disables
  std::uint64_t seed = 0;
};

// P = P0 + A exp(-t/t0) cos(2 pi f (t - tc)); parameters P0, A, t0, f, tc.
// The optimizer works with the rate 1/t0, so undamped data gives t0 = inf.
FitResult fit_damped_sinusoid(const TimeSeries& data, const FitOptions& options = {});
double damped_sinusoid(double t, double p0, double a, double t0, double f, double tc);

// P = 2 Re(C2) - 2 |C1| cos(2 phi + xi); parameters re_c2, abs_c1, xi.
// Linear in (a, b cos 2phi, c sin 2phi), so it is solved in closed form.
FitResult fit_parity(const TimeSeries& data, const FitOptions& options = {});
double parity_model(double phi, double re_c2, double abs_c1, double xi);

// Tr[|U_ideal|^T U_meas] / 4.
double cnot_fidelity(const gate::TruthTable& measured, const gate::TruthTable& ideal);
double cnot_fidelity(const Eigen::MatrixXd& measured, const Eigen::MatrixXd& ideal);
void validate_truth_table(const gate::TruthTable& t, double row_tolerance = 0.0);

// (P_upUp + P_downDown) / 2 + |C|. coherence_tolerance allows |C| slightly
// above 0.5 for fitted values.
double entanglement_fidelity(double p_up_up, double p_down_down, double coherence, double coherence_tolerance = 1e-9);
// First-order propagation of independent errors.
double entanglement_fidelity_error(double sigma_up_up, double sigma_down_down, double sigma_coherence);

struct FidelityBound {
  double f_phase = 0.0;  // (1 + <exp(i Phi)>) / 2
  double f_bound = 0.0;  // F_cnot * f_phase
};
FidelityBound max_entanglement_fidelity(double f_cnot, double doppler_factor);

double parity_from_populations(double p_up_up, double p_down_down, double p_up_down, double p_down_up);

struct FidelityReport {
  double f_cnot = 0.0;
  double p_up_up = 0.0;
  double p_down_down = 0.0;
  double coherence = 0.0;
  double coherence_error = 0.0;
  double f_ent = 0.0;
  double f_ent_error = 0.0;
  double f_phase = 0.0;
  double f_max = 0.0;
  bool entangled = false;
};

// Builds the report from a parity fit and Bell populations.
FidelityReport make_fidelity_report(double f_cnot, double p_up_up, double p_down_down, const FitResult& parity_fit,
                                    double doppler_factor, double sigma_up_up = 0.0, double sigma_down_down = 0.0);

nlohmann::json to_json(const FitResult& r);
nlohmann::json to_json(const FidelityReport& r);

}  // namespace rydgate::analysis
