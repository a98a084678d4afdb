#include "rydgate/analysis.hpp"

#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"
#include "rydgate/thermal_ensemble.hpp"

namespace rydgate::analysis {

namespace c = constants;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> weights_of(const TimeSeries& d) {
  std::vector<double> w(d.x.size(), 1.0);
  if (!d.sigma.empty()) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / d.sigma[i];
  }
  return w;
}

// Noise variance expected for the data: the supplied errors, or the
// successive-difference estimate on x-sorted data.
double noise_variance(const TimeSeries& d) {
  const std::size_t n = d.x.size();
  if (!d.sigma.empty()) {
    double s = 0.0;
    for (double v : d.sigma) s += v * v;
    return s / static_cast<double>(n);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.x[a] < d.x[b]; });
  double s = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double dy = d.y[order[i]] - d.y[order[i - 1]];
    s += dy * dy;
  }
  return s / (2.0 * static_cast<double>(n - 1));
}

// Covariance s^2 (J^T J)^+ with non-identifiable directions set to infinity.
Eigen::MatrixXd scaled_covariance(const Eigen::MatrixXd& jac, double s2, std::vector<bool>& identifiable) {
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const Eigen::Index p = jtj.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(p, p);
  identifiable.assign(static_cast<std::size_t>(p), true);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::VectorXd v = es.eigenvectors().col(k);
    if (ev[k] > cutoff) {
      inv += v * v.transpose() / ev[k];
    } else {
      for (Eigen::Index i = 0; i < p; ++i) {
        if (std::abs(v[i]) > 1e-6) identifiable[static_cast<std::size_t>(i)] = false;
      }
    }
  }
  Eigen::MatrixXd cov = s2 * inv;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!identifiable[static_cast<std::size_t>(i)]) {
      cov.row(i).setConstant(kInf);
      cov.col(i).setConstant(kInf);
    }
  }
  return cov;
}

bool is_flat(const std::vector<double>& y) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return *hi - *lo <= 1e-12 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
}

double wrap_symmetric(double x, double period) {
  return x - period * std::round(x / period);
}

// ---- damped sinusoid -------------------------------------------------------

// Internal coordinates: s = (t - t_ref) / span, parameters
// q = (P0, A, rate = span / t0, F = f span, sc = (tc - t_ref) / span).
struct DampedFunctor {
  const std::vector<double>& s;
  const std::vector<double>& y;
  const std::vector<double>& w;

  int inputs() const { return 5; }
  int values() const { return static_cast<int>(s.size()); }

  int operator()(const Eigen::VectorXd& q, Eigen::VectorXd& r) const {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double m = q[0] + q[1] * std::exp(-q[2] * s[i]) * std::cos(c::two_pi * q[3] * (s[i] - q[4]));
      r[static_cast<Eigen::Index>(i)] = w[i] * (m - y[i]);
    }
    return 0;
  }

  int df(const Eigen::VectorXd& q, Eigen::MatrixXd& j) const {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double e = std::exp(-q[2] * s[i]);
      const double arg = c::two_pi * q[3] * (s[i] - q[4]);
      const double co = std::cos(arg), si = std::sin(arg);
      j(k, 0) = w[i];
      j(k, 1) = w[i] * e * co;
      j(k, 2) = -w[i] * q[1] * s[i] * e * co;
      j(k, 3) = -w[i] * q[1] * e * si * c::two_pi * (s[i] - q[4]);
      j(k, 4) = w[i] * q[1] * e * si * c::two_pi * q[3];
    }
    return 0;
  }
};

struct LmOutcome {
  Eigen::VectorXd q;
  double cost = kInf;
  bool converged = false;
  int iterations = 0;
};

LmOutcome run_lm(const DampedFunctor& functor, Eigen::VectorXd q, const FitOptions& options) {
  DampedFunctor f = functor;
  Eigen::LevenbergMarquardt<DampedFunctor> lm(f);
  lm.parameters.xtol = options.relative_step;
  lm.parameters.ftol = 1e-15;
  lm.parameters.maxfev = 100 * (options.max_iterations + 1);
  LmOutcome out;
  auto status = lm.minimizeInit(q);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
    throw NumericalError("fit_damped_sinusoid: improper optimizer setup");
  }
  using S = Eigen::LevenbergMarquardtSpace::Status;
  while (out.iterations < options.max_iterations) {
    status = lm.minimizeOneStep(q);
    ++out.iterations;
    if (status != S::Running) break;
  }
  out.converged = status == S::RelativeReductionTooSmall || status == S::RelativeErrorTooSmall ||
                  status == S::RelativeErrorAndReductionTooSmall || status == S::CosinusTooSmall ||
                  status == S::FtolTooSmall || status == S::XtolTooSmall || status == S::GtolTooSmall;
  Eigen::VectorXd r(functor.values());
  functor(q, r);
  out.cost = r.squaredNorm();
  out.q = q;
  return out;
}

// Candidate frequencies (cycles per span) from the largest local maxima of
// the discrete spectrum of the mean-subtracted data.
std::vector<std::pair<double, std::complex<double>>> spectral_peaks(const std::vector<double>& s,
                                                                    const std::vector<double>& y, std::size_t count) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  const double f_max = 0.45 * static_cast<double>(s.size() - 1);
  const double df = 0.05;
  std::vector<double> fs;
  std::vector<double> power;
  std::vector<std::complex<double>> amp;
  for (double f = 0.5; f <= f_max; f += df) {
    std::complex<double> z = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) z += (y[i] - mean) * std::polar(1.0, -c::two_pi * f * s[i]);
    fs.push_back(f);
    power.push_back(std::norm(z));
    amp.push_back(z);
  }
  std::vector<std::size_t> maxima;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const bool left = i == 0 || power[i] >= power[i - 1];
    const bool right = i + 1 == fs.size() || power[i] >= power[i + 1];
    if (left && right) maxima.push_back(i);
  }
  std::sort(maxima.begin(), maxima.end(), [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });
  std::vector<std::pair<double, std::complex<double>>> out;
  for (std::size_t k = 0; k < std::min(count, maxima.size()); ++k) out.emplace_back(fs[maxima[k]], amp[maxima[k]]);
  if (out.empty()) out.emplace_back(1.0, std::complex<double>(0.0, 0.0));
  return out;
}

struct DampedCore {
  LmOutcome best;
  double t_ref = 0.0;
  double span = 1.0;
};

DampedCore fit_damped_core(const TimeSeries& d, const FitOptions& options, const Eigen::VectorXd* start) {
  DampedCore core;
  const auto [lo, hi] = std::minmax_element(d.x.begin(), d.x.end());
  core.t_ref = *lo;
  core.span = *hi - *lo;
  std::vector<double> s(d.x.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (d.x[i] - core.t_ref) / core.span;
  const std::vector<double> w = weights_of(d);
  const DampedFunctor functor{s, d.y, w};

  std::vector<Eigen::VectorXd> starts;
  if (start != nullptr) {
    starts.push_back(*start);
  } else {
    const auto [ymin, ymax] = std::minmax_element(d.y.begin(), d.y.end());
    const double p0 = 0.5 * (*ymin + *ymax);
    const double a = 0.5 * (*ymax - *ymin);
    const double n = static_cast<double>(s.size());
    for (const auto& [f, z] : spectral_peaks(s, d.y, 3)) {
      // sum (y - mean) exp(-2 pi i f s) ~ n A/2 exp(-2 pi i f sc)
      const double sc = std::abs(z) > 0.0 ? -std::arg(z) / (c::two_pi * f) : 0.0;
      const double a_spec = 2.0 * std::abs(z) / n;
      for (double rate : {0.1, 1.0}) {
        Eigen::VectorXd q(5);
        q << p0, std::max(a, a_spec), rate, f, sc;
        starts.push_back(q);
      }
    }
  }
  // Decay faster than two sampling intervals fits single points, and near
  // the Nyquist frequency A and tc trade off freely; such optima are used
  // only if nothing else is found.
  const double max_rate = static_cast<double>(s.size()) / 2.0;
  const double max_freq = 0.45 * static_cast<double>(s.size() - 1);
  LmOutcome fallback;
  for (const auto& q0 : starts) {
    LmOutcome o = run_lm(functor, q0, options);
    LmOutcome& slot = o.q[2] <= max_rate && std::abs(o.q[3]) <= max_freq ? core.best : fallback;
    if (o.cost < slot.cost || (o.cost == slot.cost && o.converged && !slot.converged)) slot = o;
  }
  if (!std::isfinite(core.best.cost)) core.best = fallback;
  return core;
}

// Maps internal coordinates to (P0, A, t0, f, tc) with A >= 0 and tc wrapped
// into (-1/(2f), 1/(2f)].
std::vector<double> external_params(Eigen::VectorXd q, double t_ref, double span) {
  if (q[1] < 0.0 && q[3] != 0.0) {
    q[1] = -q[1];
    q[4] += 0.5 / q[3];
  }
  q[3] = std::abs(q[3]);  // cos is even
  const double f = q[3] / span;
  double tc = t_ref + q[4] * span;
  if (f > 0.0) tc = wrap_symmetric(tc, 1.0 / f);
  const double t0 = q[2] > 0.0 ? span / q[2] : kInf;
  return {q[0], q[1], t0, f, tc};
}

}  // namespace

void TimeSeries::validate(double lo, double hi) const {
  if (x.size() != y.size()) throw InvalidInput("time series: x and y lengths differ");
  if (!sigma.empty() && sigma.size() != x.size()) throw InvalidInput("time series: sigma length differs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidInput("time series: non-finite value");
    if (y[i] < lo || y[i] > hi) throw InvalidInput("time series: value " + std::to_string(y[i]) + " out of range");
    if (!sigma.empty() && !(sigma[i] > 0.0)) throw InvalidInput("time series: standard errors must be positive");
  }
}

TimeSeries read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  TimeSeries ts;
  std::string line;
  bool any_row = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cols.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (!any_row) continue;  // header
      throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric row");
    }
    if (cols.size() < 2 || cols.size() > 3) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 2 or 3 columns");
    if (any_row && (cols.size() == 3) != !ts.sigma.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": inconsistent column count");
    }
    ts.x.push_back(cols[0]);
    ts.y.push_back(cols[1]);
    if (cols.size() == 3) ts.sigma.push_back(cols[2]);
    any_row = true;
  }
  if (!any_row) throw ConfigError(path + ": no data rows");
  return ts;
}

bool FitResult::has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

double FitResult::param(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("unknown fit parameter " + name);
  return params[static_cast<std::size_t>(it - names.begin())];
}

double FitResult::error(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("unknown fit parameter " + name);
  return errors[static_cast<std::size_t>(it - names.begin())];
}

double damped_sinusoid(double t, double p0, double a, double t0, double f, double tc) {
  return p0 + a * std::exp(-t / t0) * std::cos(c::two_pi * f * (t - tc));
}

FitResult fit_damped_sinusoid(const TimeSeries& data, const FitOptions& options) {
  data.validate();
  const std::size_t n = data.x.size();
  if (n < 10) throw InvalidInput("fit_damped_sinusoid: needs at least 10 points");
  const auto [lo, hi] = std::minmax_element(data.x.begin(), data.x.end());
  if (!(*hi > *lo)) throw InvalidInput("fit_damped_sinusoid: abscissa has zero span");

  const DampedCore core = fit_damped_core(data, options, nullptr);
  const LmOutcome& best = core.best;

  FitResult r;
  r.model = "damped_sinusoid";
  r.names = {"P0", "A", "t0", "f", "tc"};
  r.converged = best.converged;
  r.iterations = best.iterations;
  r.params = external_params(best.q, core.t_ref, core.span);
  r.residual_norm = std::sqrt(best.cost);
  const double dof = static_cast<double>(n - 5);
  r.reduced_chi2 = best.cost / dof;

  // Covariance in the external parameters at the optimum. The rate enters as
  // t0 = span/rate, so J is formed directly in (P0, A, rate, f, tc) and t0 is
  // propagated afterwards.
  const std::vector<double>& p = r.params;
  const double rate = best.q[2] / core.span;  // 1/s
  const std::vector<double> w = weights_of(data);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double t = data.x[i];
    const double e = std::exp(-rate * t);
    const double arg = c::two_pi * p[3] * (t - p[4]);
    const double co = std::cos(arg), si = std::sin(arg);
    jac(k, 0) = w[i];
    jac(k, 1) = w[i] * e * co;
    jac(k, 2) = -w[i] * p[1] * t * e * co;
    jac(k, 3) = -w[i] * p[1] * e * si * c::two_pi * (t - p[4]);
    jac(k, 4) = w[i] * p[1] * e * si * c::two_pi * p[3];
  }
  // Column scaling keeps the eigenvalue cutoff meaningful across units.
  Eigen::VectorXd scale = jac.colwise().norm().transpose();
  for (Eigen::Index k = 0; k < 5; ++k) scale[k] = scale[k] > 0.0 ? scale[k] : 1.0;
  std::vector<bool> ident;
  const Eigen::VectorXd inv_scale = scale.cwiseInverse();
  Eigen::MatrixXd cov =
      inv_scale.asDiagonal() * scaled_covariance(jac * inv_scale.asDiagonal(), r.reduced_chi2, ident) * inv_scale.asDiagonal();
  // rate -> t0 = 1/rate
  if (rate != 0.0) {
    const double d = -1.0 / (rate * rate);
    cov.row(2) *= d;
    cov.col(2) *= d;
  } else {
    cov.row(2).setConstant(kInf);
    cov.col(2).setConstant(kInf);
  }
  r.covariance = cov;
  r.errors.resize(5);
  for (Eigen::Index i = 0; i < 5; ++i) r.errors[static_cast<std::size_t>(i)] = std::sqrt(std::abs(cov(i, i)));

  if (!r.converged) r.flags.push_back("not_converged");
  if (!(rate > 0.0)) r.flags.push_back("no_damping");

  // Significance of the oscillation against a constant model.
  const double mean_w = [&] {
    double sw = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sw += w[i] * w[i];
      swy += w[i] * w[i] * data.y[i];
    }
    return swy / sw;
  }();
  double rss0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) rss0 += std::pow(w[i] * (data.y[i] - mean_w), 2);
  const double s2 = best.cost / dof;
  const double threshold = 2.0 * (4.0 + 2.0 * std::log(static_cast<double>(n)));
  const bool insignificant = s2 > 0.0 ? (rss0 - best.cost) / s2 < threshold : rss0 == 0.0;
  if (is_flat(data.y) || insignificant || !(std::abs(p[1]) >= 2.0 * r.errors[1])) {
    r.flags.push_back("frequency_unidentifiable");
    r.errors[3] = kInf;
    r.errors[4] = kInf;
  } else if (p[3] * core.span < 1.0) {
    r.flags.push_back("less_than_one_period");
  }
  // Weighted residuals have unit variance.
  const double expected = data.sigma.empty() ? noise_variance(data) : 1.0;
  if (s2 > 4.0 * expected && s2 > 0.0) r.flags.push_back("poor_fit");

  if (options.bootstrap > 0) {
    // Residual bootstrap around the fitted curve, restarted from the optimum.
    std::vector<double> fitted(n), resid(n);
    for (std::size_t i = 0; i < n; ++i) {
      fitted[i] = damped_sinusoid(data.x[i], p[0], p[1], p[2], p[3], p[4]);
      resid[i] = data.y[i] - fitted[i];
    }
    std::vector<std::vector<double>> samples;
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
      thermal::Rng rng = thermal::make_rng(options.seed, b);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      TimeSeries bs = data;
      for (std::size_t i = 0; i < n; ++i) bs.y[i] = fitted[i] + resid[pick(rng)];
      const DampedCore bc = fit_damped_core(bs, options, &best.q);
      samples.push_back(external_params(bc.best.q, bc.t_ref, bc.span));
    }
    r.bootstrap_errors.assign(5, 0.0);
    for (std::size_t k = 0; k < 5; ++k) {
      double m = 0.0, m2 = 0.0;
      for (const auto& sp : samples) {
        m += sp[k];
        m2 += sp[k] * sp[k];
      }
      const double nb = static_cast<double>(samples.size());
      m /= nb;
      r.bootstrap_errors[k] = std::sqrt(std::max(0.0, (m2 - nb * m * m) / (nb - 1.0)));
    }
  }
  return r;
}

double parity_model(double phi, double re_c2, double abs_c1, double xi) {
  return 2.0 * re_c2 - 2.0 * abs_c1 * std::cos(2.0 * phi + xi);
}

FitResult fit_parity(const TimeSeries& data, const FitOptions& options) {
  data.validate(-1.05, 1.05);
  const std::size_t n = data.x.size();
  if (n < 8) throw InvalidInput("fit_parity: needs at least 8 points");
  const auto [lo, hi] = std::minmax_element(data.x.begin(), data.x.end());
  if (*hi - *lo < c::pi * (1.0 - 1e-6)) throw InvalidInput("fit_parity: phases must span at least pi");

  const std::vector<double> w = weights_of(data);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    x(k, 0) = w[i];
    x(k, 1) = w[i] * std::cos(2.0 * data.x[i]);
    x(k, 2) = w[i] * std::sin(2.0 * data.x[i]);
    y[k] = w[i] * data.y[i];
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  const double cost = (x * beta - y).squaredNorm();
  const double s2 = cost / static_cast<double>(n - 3);
  std::vector<bool> ident;
  const Eigen::MatrixXd cov_lin = scaled_covariance(x, s2, ident);

  const double a = beta[0], b = beta[1], cc = beta[2];
  const double r2 = b * b + cc * cc;
  const double abs_c1 = 0.5 * std::sqrt(r2);
  const double xi = std::atan2(cc, -b);

  FitResult r;
  r.model = "parity";
  r.names = {"re_c2", "abs_c1", "xi"};
  r.params = {0.5 * a, abs_c1, xi};
  r.residual_norm = std::sqrt(cost);
  r.reduced_chi2 = s2;
  r.converged = true;
  r.iterations = 0;
  (void)options;

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 0) = 0.5;
  if (r2 > 0.0) {
    g(1, 1) = b / (4.0 * abs_c1);
    g(1, 2) = cc / (4.0 * abs_c1);
    g(2, 1) = cc / r2;
    g(2, 2) = -b / r2;
  }
  r.covariance = g * cov_lin * g.transpose();
  if (r2 == 0.0) {
    // |C1| = 0: the amplitude error is the radial spread of (b, c).
    r.covariance(1, 1) = 0.25 * 0.5 * (cov_lin(1, 1) + cov_lin(2, 2));
    r.covariance(2, 2) = kInf;
  }
  r.errors.resize(3);
  for (Eigen::Index i = 0; i < 3; ++i) r.errors[static_cast<std::size_t>(i)] = std::sqrt(std::abs(r.covariance(i, i)));

  if (is_flat(data.y) || !(abs_c1 >= 2.0 * r.errors[1])) {
    r.flags.push_back("phase_unidentifiable");
    r.errors[2] = kInf;
  }
  const double expected = data.sigma.empty() ? noise_variance(data) : 1.0;
  if (s2 > 4.0 * expected && s2 > 0.0) r.flags.push_back("poor_fit");
  return r;
}

void validate_truth_table(const gate::TruthTable& t, double row_tolerance) {
  for (std::size_t i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (double v : t.p[i]) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("truth table entry outside [0, 1]");
      sum += v;
    }
    if (sum > 1.0 + row_tolerance + 1e-12) throw InvalidInput("truth table row sums above 1");
  }
}

double cnot_fidelity(const Eigen::MatrixXd& measured, const Eigen::MatrixXd& ideal) {
  if (measured.rows() != 4 || measured.cols() != 4 || ideal.rows() != 4 || ideal.cols() != 4) {
    throw InvalidInput("cnot_fidelity: expects 4x4 matrices");
  }
  return (ideal.cwiseAbs().transpose() * measured).trace() / 4.0;
}

double cnot_fidelity(const gate::TruthTable& measured, const gate::TruthTable& ideal) {
  Eigen::Matrix4d m, u;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) {
      // Rows are inputs; the matrix form uses columns as inputs.
      m(k, i) = measured.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      u(k, i) = ideal.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
  }
  return cnot_fidelity(Eigen::MatrixXd(m), Eigen::MatrixXd(u));
}

double entanglement_fidelity(double p_up_up, double p_down_down, double coherence, double coherence_tolerance) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(p_up_up) || !in_unit(p_down_down)) throw DomainError("entanglement_fidelity: populations outside [0, 1]");
  if (!(coherence >= 0.0 && coherence <= 0.5 + coherence_tolerance)) {
    throw DomainError("entanglement_fidelity: coherence outside [0, 0.5]");
  }
  return 0.5 * (p_up_up + p_down_down) + coherence;
}

double entanglement_fidelity_error(double sigma_up_up, double sigma_down_down, double sigma_coherence) {
  return std::sqrt(0.25 * sigma_up_up * sigma_up_up + 0.25 * sigma_down_down * sigma_down_down +
                   sigma_coherence * sigma_coherence);
}

FidelityBound max_entanglement_fidelity(double f_cnot, double doppler_factor) {
  if (!(f_cnot >= 0.0 && f_cnot <= 1.0) || !(doppler_factor >= 0.0 && doppler_factor <= 1.0)) {
    throw DomainError("max_entanglement_fidelity: inputs outside [0, 1]");
  }
  FidelityBound b;
  b.f_phase = 0.5 * (1.0 + doppler_factor);
  b.f_bound = f_cnot * b.f_phase;
  return b;
}

double parity_from_populations(double p_up_up, double p_down_down, double p_up_down, double p_down_up) {
  return p_up_up + p_down_down - p_up_down - p_down_up;
}

FidelityReport make_fidelity_report(double f_cnot, double p_up_up, double p_down_down, const FitResult& parity_fit,
                                    double doppler_factor, double sigma_up_up, double sigma_down_down) {
  FidelityReport rep;
  rep.f_cnot = f_cnot;
  rep.p_up_up = p_up_up;
  rep.p_down_down = p_down_down;
  rep.coherence = parity_fit.param("abs_c1");
  rep.coherence_error = parity_fit.error("abs_c1");
  rep.f_ent = entanglement_fidelity(p_up_up, p_down_down, rep.coherence, 1e-6);
  rep.f_ent_error = entanglement_fidelity_error(sigma_up_up, sigma_down_down, rep.coherence_error);
  const FidelityBound b = max_entanglement_fidelity(f_cnot, doppler_factor);
  rep.f_phase = b.f_phase;
  rep.f_max = b.f_bound;
  rep.entangled = rep.f_ent > 0.5;
  return rep;
}

nlohmann::json to_json(const FitResult& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["converged"] = r.converged;
  j["authoritative"] = r.authoritative();
  j["iterations"] = r.iterations;
  j["residual_norm"] = r.residual_norm;
  j["reduced_chi2"] = r.reduced_chi2;
  j["flags"] = r.flags;
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    nlohmann::json p{{"value", r.params[i]}};
    // JSON has no infinity; unidentifiable errors are written as null.
    p["error"] = std::isfinite(r.errors[i]) ? nlohmann::json(r.errors[i]) : nlohmann::json(nullptr);
    if (!r.bootstrap_errors.empty()) p["bootstrap_error"] = r.bootstrap_errors[i];
    params[r.names[i]] = p;
  }
  j["parameters"] = params;
  return j;
}

nlohmann::json to_json(const FidelityReport& r) {
  return nlohmann::json{{"F_cnot", r.f_cnot},
                        {"P_up_Up", r.p_up_up},
                        {"P_down_Down", r.p_down_down},
                        {"coherence", r.coherence},
                        {"coherence_error", std::isfinite(r.coherence_error) ? nlohmann::json(r.coherence_error) : nlohmann::json(nullptr)},
                        {"F_ent", r.f_ent},
                        {"F_ent_error", std::isfinite(r.f_ent_error) ? nlohmann::json(r.f_ent_error) : nlohmann::json(nullptr)},
                        {"F_phase", r.f_phase},
                        {"F_max", r.f_max},
                        {"entangled", r.entangled}};
}

}  // namespace rydgate::analysis
