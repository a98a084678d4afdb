#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rydgate/analysis.hpp"
#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"

using namespace rydgate;
using namespace rydgate::analysis;
namespace c = rydgate::constants;

namespace {

struct DampedTruth {
  double p0 = 0.5, a = 0.49, t0 = 28e-6, f = 0.625e6, tc = 0.0;
};

TimeSeries damped_data(const DampedTruth& g, double noise, std::uint64_t seed, std::size_t n = 81, double t_max = 8e-6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  TimeSeries ts;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t_max * static_cast<double>(i) / static_cast<double>(n - 1);
    ts.x.push_back(t);
    ts.y.push_back(g.p0 + g.a * std::exp(-t / g.t0) * std::cos(c::two_pi * g.f * (t - g.tc)) + noise * e(rng));
  }
  return ts;
}

TimeSeries parity_data(double re_c2, double abs_c1, double xi, double noise, std::uint64_t seed, std::size_t n = 25) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  TimeSeries ts;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = c::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    ts.x.push_back(phi);
    ts.y.push_back(2 * re_c2 - 2 * abs_c1 * std::cos(2 * phi + xi) + noise * e(rng));
  }
  return ts;
}

// Squared Mahalanobis distance over the selected parameters.
double mahalanobis2(const FitResult& r, const std::vector<double>& truth, const std::vector<std::size_t>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd cov(k, k);
  Eigen::VectorXd d(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    d[i] = r.params[idx[static_cast<std::size_t>(i)]] - truth[idx[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < k; ++j) {
      cov(i, j) = r.covariance(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                               static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
    }
  }
  return d.dot(cov.ldlt().solve(d));
}

// chi^2 quantiles at the two-sigma (95.45 %) level.
constexpr double kChi2TwoSigma4 = 9.72;
constexpr double kChi2TwoSigma3 = 8.02;

}  // namespace

TEST_CASE("damped sinusoid: noisy recovery") {
  const DampedTruth g;
  const std::vector<double> truth{g.p0, g.a, g.t0, g.f, g.tc};
  int inside = 0;
  const int trials = 20;
  for (int s = 0; s < trials; ++s) {
    const auto r = fit_damped_sinusoid(damped_data(g, 0.02, 100 + s));
    REQUIRE(r.converged);
    CHECK_FALSE(r.has_flag("frequency_unidentifiable"));
    if (mahalanobis2(r, truth, {0, 1, 2, 3}) <= kChi2TwoSigma4) ++inside;
    if (s == 0) {
      MESSAGE("A = " << r.param("A") << " +- " << r.error("A") << ", f = " << r.param("f") << " +- " << r.error("f"));
      for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(r.params[k] - truth[k]) < 2 * r.errors[k]);
    }
  }
  // The joint two-sigma region should hold about 95 % of the datasets.
  CHECK(inside >= 17);
}

TEST_CASE("damped sinusoid: noiseless and degenerate data") {
  const DampedTruth g;
  const auto exact = fit_damped_sinusoid(damped_data(g, 0.0, 1));
  CHECK(exact.converged);
  CHECK(exact.residual_norm < 1e-10);
  CHECK(exact.param("f") == doctest::Approx(g.f).epsilon(1e-9));
  CHECK(exact.param("t0") == doctest::Approx(g.t0).epsilon(1e-7));

  TimeSeries flat = damped_data(DampedTruth{0.3, 0.0, 28e-6, 0.625e6, 0.0}, 0.0, 1);
  const auto r0 = fit_damped_sinusoid(flat);
  CHECK(r0.has_flag("frequency_unidentifiable"));
  CHECK(std::abs(r0.param("A")) < 1e-9);
  CHECK(r0.param("P0") == doctest::Approx(0.3).epsilon(1e-12));

  const auto noisy = fit_damped_sinusoid(damped_data(DampedTruth{0.5, 0.0, 28e-6, 0.625e6, 0.0}, 0.02, 3));
  CHECK(noisy.has_flag("frequency_unidentifiable"));
  MESSAGE("noise-only fit: A = " << noisy.param("A") << " t0 = " << noisy.param("t0") << " f = " << noisy.param("f"));
  CHECK(std::abs(noisy.param("A")) < 0.1);
}

TEST_CASE("damped sinusoid: consistency and bootstrap") {
  // Smaller amplitude keeps the 0.05 noise level inside the probability range.
  const DampedTruth g{0.5, 0.3, 28e-6, 0.625e6, 0.0};
  double previous = 1e9;
  for (double sigma : {0.05, 0.02, 0.005}) {
    double err = 0.0;
    for (int s = 0; s < 8; ++s) {
      const auto r = fit_damped_sinusoid(damped_data(g, sigma, 500 + s));
      err += std::pow((r.param("A") - g.a) / g.a, 2) + std::pow((r.param("f") - g.f) / g.f, 2);
    }
    CHECK(err < previous);
    previous = err;
  }

  FitOptions opt;
  opt.bootstrap = 200;
  opt.seed = 9;
  const auto r = fit_damped_sinusoid(damped_data(g, 0.02, 77), opt);
  REQUIRE(r.bootstrap_errors.size() == 5);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(r.bootstrap_errors[k] > 0.5 * r.errors[k]);
    CHECK(r.bootstrap_errors[k] < 2.0 * r.errors[k]);
  }
}

TEST_CASE("damped sinusoid: input checks") {
  TimeSeries few = damped_data(DampedTruth{}, 0.0, 1, 9);
  CHECK_THROWS_AS(fit_damped_sinusoid(few), InvalidInput);
  TimeSeries bad = damped_data(DampedTruth{}, 0.0, 1);
  bad.y[3] = 1.2;
  CHECK_THROWS_AS(fit_damped_sinusoid(bad), InvalidInput);
  bad.y.pop_back();
  CHECK_THROWS_AS(fit_damped_sinusoid(bad), InvalidInput);
}

TEST_CASE("parity fit") {
  SUBCASE("ideal Bell parity") {
    TimeSeries ts;
    for (int i = 0; i < 16; ++i) {
      ts.x.push_back(c::pi * i / 15.0);
      ts.y.push_back(-std::cos(2 * ts.x.back()));
    }
    const auto r = fit_parity(ts);
    CHECK(r.param("abs_c1") == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(r.param("re_c2")) < 1e-12);
    CHECK(std::abs(r.param("xi")) < 1e-9);
  }

  SUBCASE("noisy recovery") {
    const std::vector<double> truth{0.02, 0.16, 0.0};
    int inside = 0;
    for (int s = 0; s < 20; ++s) {
      const auto r = fit_parity(parity_data(0.02, 0.16, 0.0, 0.03, 40 + s));
      if (mahalanobis2(r, truth, {0, 1, 2}) <= kChi2TwoSigma3) ++inside;
      if (s == 0) {
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(r.params[k] - truth[k]) < 2 * r.errors[k]);
        CHECK_FALSE(r.has_flag("poor_fit"));
      }
    }
    CHECK(inside >= 17);
  }

  SUBCASE("negative amplitude is absorbed into the phase") {
    const auto r = fit_parity(parity_data(0.0, 0.2, c::pi, 0.0, 1));
    CHECK(r.param("abs_c1") == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(std::abs(std::abs(r.param("xi")) - c::pi) < 1e-9);
  }

  SUBCASE("constant and wrong-frequency data") {
    TimeSeries flat = parity_data(0.1, 0.0, 0.0, 0.0, 1);
    const auto r = fit_parity(flat);
    CHECK(r.param("abs_c1") < 1e-12);
    CHECK(r.has_flag("phase_unidentifiable"));

    TimeSeries wrong;
    for (int i = 0; i < 41; ++i) {
      wrong.x.push_back(c::two_pi * i / 40.0);
      wrong.y.push_back(0.8 * std::cos(wrong.x.back()));
    }
    const auto rw = fit_parity(wrong);
    CHECK(rw.param("abs_c1") < 0.05);
    CHECK(rw.has_flag("poor_fit"));
  }

  SUBCASE("input checks") {
    TimeSeries ts = parity_data(0.0, 0.3, 0.0, 0.0, 1, 7);
    CHECK_THROWS_AS(fit_parity(ts), InvalidInput);
    TimeSeries narrow;
    for (int i = 0; i < 10; ++i) {
      narrow.x.push_back(0.2 * i);
      narrow.y.push_back(0.0);
    }
    CHECK_THROWS_AS(fit_parity(narrow), InvalidInput);
  }
}

TEST_CASE("CNOT fidelity") {
  const auto ideal = gate::ideal_cnot_table();
  CHECK(cnot_fidelity(ideal, ideal) == 1.0);

  gate::TruthTable uniform;
  for (auto& row : uniform.p) row.fill(0.25);
  CHECK(cnot_fidelity(uniform, ideal) == doctest::Approx(0.25).epsilon(1e-15));

  // Ideal cells 0.70, 0.76, 0.71, 0.75; the rest spread over the row.
  gate::TruthTable m;
  const double diag[4] = {0.70, 0.76, 0.71, 0.75};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      m.p[i][k] = ideal.p[i][k] == 1.0 ? diag[i] : (1.0 - diag[i]) / 3.0;
    }
  }
  CHECK(cnot_fidelity(m, ideal) == doctest::Approx(0.73).epsilon(1e-14));
  validate_truth_table(m);

  // Invariant under the same relabelling of inputs and outputs.
  const std::size_t perm[4] = {2, 0, 3, 1};
  gate::TruthTable mp, ip;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      mp.p[perm[i]][perm[k]] = m.p[i][k];
      ip.p[perm[i]][perm[k]] = ideal.p[i][k];
    }
  }
  CHECK(cnot_fidelity(mp, ip) == doctest::Approx(0.73).epsilon(1e-14));

  CHECK_THROWS_AS(cnot_fidelity(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(4, 4)), InvalidInput);
  m.p[0][0] = 1.1;
  CHECK_THROWS_AS(validate_truth_table(m), InvalidInput);
}

TEST_CASE("entanglement fidelity and bounds") {
  CHECK(entanglement_fidelity(0.41, 0.44, 0.16) == doctest::Approx(0.585).epsilon(1e-14));
  CHECK(entanglement_fidelity(0.5, 0.5, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(entanglement_fidelity(0.25, 0.25, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(entanglement_fidelity(1.2, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(entanglement_fidelity(0.2, 0.2, 0.6), DomainError);

  // Monotone in each argument.
  const double base = entanglement_fidelity(0.3, 0.3, 0.1);
  CHECK(entanglement_fidelity(0.31, 0.3, 0.1) >= base);
  CHECK(entanglement_fidelity(0.3, 0.31, 0.1) >= base);
  CHECK(entanglement_fidelity(0.3, 0.3, 0.11) >= base);

  CHECK(entanglement_fidelity_error(0.02, 0.02, 0.01) == doctest::Approx(std::sqrt(0.0001 + 0.0001 + 0.0001)).epsilon(1e-14));

  const auto b = max_entanglement_fidelity(0.73, 0.78);
  CHECK(b.f_phase == doctest::Approx(0.89).epsilon(1e-14));
  CHECK(std::abs(b.f_bound - 0.65) < 0.005);
  CHECK(max_entanglement_fidelity(0.73, 1.0).f_bound == 0.73);
  CHECK_THROWS_AS(max_entanglement_fidelity(1.5, 0.5), DomainError);

  CHECK(parity_from_populations(0.5, 0.5, 0.0, 0.0) == 1.0);
  CHECK(parity_from_populations(0.0, 0.0, 0.5, 0.5) == -1.0);
  CHECK(parity_from_populations(0.25, 0.25, 0.25, 0.25) == 0.0);
}

TEST_CASE("fidelity report and JSON") {
  const auto fit = fit_parity(parity_data(0.02, 0.16, 0.0, 0.0, 1));
  const auto rep = make_fidelity_report(0.73, 0.41, 0.44, fit, 0.78, 0.02, 0.02);
  CHECK(rep.f_ent == doctest::Approx(0.585).epsilon(1e-9));
  CHECK(rep.entangled);
  CHECK(rep.f_max == doctest::Approx(0.73 * 0.89).epsilon(1e-12));

  const auto j = to_json(rep);
  CHECK(j.at("entangled").get<bool>());
  CHECK(j.at("F_ent").get<double>() == doctest::Approx(0.585).epsilon(1e-9));

  const auto jf = to_json(fit_damped_sinusoid(damped_data(DampedTruth{}, 0.02, 5)));
  CHECK(jf.at("model") == "damped_sinusoid");
  CHECK(jf.at("parameters").contains("f"));
  CHECK(jf.at("converged").get<bool>());

  const auto jflat = to_json(fit_parity(parity_data(0.1, 0.0, 0.0, 0.0, 1)));
  CHECK(jflat.at("parameters").at("xi").at("error").is_null());
}

TEST_CASE("CSV reader") {
  const std::string path = "test_analysis_series.csv";
  {
    std::ofstream out(path);
    out << "# synthetic\n" << "t_s,P,stderr\n" << "0,0.5,0.01\n" << "1e-7,0.6,0.01\n";
  }
  const auto ts = read_csv(path);
  CHECK(ts.x.size() == 2);
  CHECK(ts.sigma.size() == 2);
  CHECK(ts.x[1] == 1e-7);
  {
    std::ofstream out(path);
    out << "0,0.5\n" << "abc,0.6\n";
  }
  CHECK_THROWS_AS(read_csv(path), ConfigError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_csv("does/not/exist.csv"), ConfigError);
}
