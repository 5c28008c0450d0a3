#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "ddwave/fisher.hpp"
#include "support/oracles.hpp"

using namespace ddwave;
using Catch::Approx;

namespace {

// kappa = 2 setting: B = 10 MHz, fs = 5 MHz, N = 50, K = 100
SystemConfig medium_config() {
  return make_config(1e-5, 5e6, 1e7, 1e-9, 1.0, {1, 0});
}

ParamPrior reference_prior() { return make_prior(1e-8, 5e3); }

double rel_diff_max(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const double scale = a.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("prior information closed form") {
  const InfoMatrix j = prior_information(reference_prior());
  CHECK(j(0, 0) == Approx(1e16));
  CHECK(j(1, 1) == Approx(4e-8));
  CHECK(j(0, 1) == 0.0);

  CHECK(prior_information(make_prior(1.0, 1.0)).isApprox(InfoMatrix::Identity()));

  const InfoMatrix doubled = prior_information(make_prior(2e-8, 5e3));
  CHECK(doubled(0, 0) == Approx(0.25 * j(0, 0)));
}

TEST_CASE("fim basics") {
  std::mt19937_64 rng(5);
  const SystemConfig c = oracle::random_small_config(rng);
  const NoiseCovariance cov = noise_covariance(c);
  const ChannelParams theta{0.003 * c.T0, 0.004 * c.f0};

  SECTION("zero spectrum gives zero information") {
    CHECK(fim(c, cov, theta, zero_spectrum(c)).norm() == 0.0);
  }
  SECTION("quadratic scaling in the spectrum") {
    const Eigen::VectorXcd x = oracle::random_unit_spectrum(c, rng, 1.0);
    const InfoMatrix j1 = fim(c, cov, theta, Spectrum{x});
    const InfoMatrix j2 = fim(c, cov, theta, Spectrum{cplx(0.3, -1.7) * x});
    CHECK(j2.isApprox(std::norm(cplx(0.3, -1.7)) * j1, 1e-10));
  }
  SECTION("symmetric PSD") {
    const Eigen::VectorXcd x = oracle::random_unit_spectrum(c, rng, 2.0);
    const InfoMatrix j = fim(c, cov, theta, Spectrum{x});
    CHECK(j(0, 1) == j(1, 0));
    CHECK(j(0, 0) >= 0.0);
    CHECK(j(1, 1) >= 0.0);
    CHECK(j(0, 0) * j(1, 1) - j(0, 1) * j(0, 1) >= -1e-10 * j(0, 0) * j(1, 1));
  }
}

TEST_CASE("single harmonic delay information matches the closed form") {
  // B = fs, tau = nu = 0: [J_F]_11 = 2 N |gamma|^2 P (k w0)^2 / (N0 B)
  const SystemConfig c = make_config(1e-5, 1e6, 1e6, 3e-9, 1.0, {0.6, 0.8});
  const NoiseCovariance cov = noise_covariance(c);
  const double p = 1.7;
  const int k = 3;
  const InfoMatrix j = fim(c, cov, {0.0, 0.0}, unit_harmonic(c, k, p));
  const double expected = 2.0 * c.N * std::norm(c.gamma) * p *
                          std::pow(k * c.omega0, 2) / (c.N0 * c.B);
  CHECK(j(0, 0) == Approx(expected).epsilon(1e-10));
}

TEST_CASE("fim equals the negative expected Hessian of the log-likelihood") {
  // Mean term of E_{y|theta0}[ln p(y|theta)] is -(v(theta)-v(theta0))^H
  // R^{-1} (v(theta)-v(theta0)); its Hessian at theta0 is -J_F.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  int checked = 0;
  while (checked < 20) {
    const SystemConfig c = oracle::random_small_config(rng);
    const NoiseCovariance cov = noise_covariance(c);
    const Spectrum x{oracle::random_unit_spectrum(c, rng, 1.0)};
    const ChannelParams theta0{0.01 * c.T0 * normal(rng), 0.01 * c.f0 * normal(rng)};
    const InfoMatrix j = fim(c, cov, theta0, x);
    if (j(0, 0) <= 0 || j(1, 1) <= 0) continue;  // draw again, degenerate case
    ++checked;

    const Eigen::VectorXcd v0 = noiseless_receive(c, theta0, x);
    const auto f = [&](double dtau, double dnu) {
      const Eigen::VectorXcd d =
          noiseless_receive(c, {theta0.tau + dtau, theta0.nu + dnu}, x) - v0;
      return -d.dot(Eigen::VectorXcd(cov.solve(d))).real();
    };
    const double h_tau = 1e-3 / std::sqrt(j(0, 0));
    const double h_nu = 1e-3 / std::sqrt(j(1, 1));

    const double j11 = -(f(h_tau, 0) - 2 * f(0, 0) + f(-h_tau, 0)) / (h_tau * h_tau);
    const double j22 = -(f(0, h_nu) - 2 * f(0, 0) + f(0, -h_nu)) / (h_nu * h_nu);
    const double j12 = -(f(h_tau, h_nu) - f(h_tau, -h_nu) - f(-h_tau, h_nu) +
                         f(-h_tau, -h_nu)) /
                       (4 * h_tau * h_nu);
    CHECK(std::abs(j11 - j(0, 0)) < 1e-4 * j(0, 0));
    CHECK(std::abs(j22 - j(1, 1)) < 1e-4 * j(1, 1));
    CHECK(std::abs(j12 - j(0, 1)) < 1e-4 * std::sqrt(j(0, 0) * j(1, 1)));
  }
}

TEST_CASE("sensitivity set structure") {
  const SystemConfig c = medium_config();
  const NoiseCovariance cov = noise_covariance(c);
  const ParamPrior prior = reference_prior();
  const SensitivitySet s = sensitivity_set(c, cov, prior, 6);

  SECTION("Hermitian pair relation") {
    const double scale = s.g11.cwiseAbs().maxCoeff();
    CHECK((s.g11 - s.g11.adjoint()).cwiseAbs().maxCoeff() < 1e-12 * scale);
    CHECK((s.g22 - s.g22.adjoint()).cwiseAbs().maxCoeff() <
          1e-12 * s.g22.cwiseAbs().maxCoeff());
    const double cross_scale = s.g12.cwiseAbs().maxCoeff();
    CHECK((s.g12 - s.g21.adjoint()).cwiseAbs().maxCoeff() < 1e-12 * cross_scale);
  }
  SECTION("diagonal blocks are positive semi-definite") {
    for (const Eigen::MatrixXcd* g : {&s.g11, &s.g22}) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
          Eigen::MatrixXcd(0.5 * (*g + g->adjoint())), Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >
            -1e-12 * es.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  SECTION("noise rescaling is exact") {
    const SensitivitySet s2 = s.rescaled_noise(2.0 * c.N0);
    CHECK((s2.g11 - 0.5 * s.g11).cwiseAbs().maxCoeff() <
          1e-14 * s.g11.cwiseAbs().maxCoeff());
  }
  SECTION("invalid order is rejected") {
    CHECK_THROWS_AS(sensitivity_set(c, cov, prior, 0), ConfigError);
  }
}

TEST_CASE("order one rule evaluates the integrand at the prior mean") {
  std::mt19937_64 rng(23);
  const SystemConfig c = oracle::random_small_config(rng);
  const NoiseCovariance cov = noise_covariance(c);
  const SensitivitySet s = sensitivity_set(c, cov, reference_prior(), 1);
  const auto [dtau, dnu] = channel_matrix_derivatives(c, {0.0, 0.0});
  const Eigen::MatrixXcd g11 = dtau.adjoint() * Eigen::MatrixXcd(cov.solve(dtau));
  const Eigen::MatrixXcd g12 = dtau.adjoint() * Eigen::MatrixXcd(cov.solve(dnu));
  CHECK(oracle::rel_error(s.g11, g11) < 1e-12);
  CHECK(oracle::rel_error(s.g12, g12) < 1e-12);
}

TEST_CASE("quadrature order ten has converged on the fixed-bandwidth setting") {
  const SystemConfig c = medium_config();
  const NoiseCovariance cov = noise_covariance(c);
  const ParamPrior prior = reference_prior();
  const SensitivitySet s10 = sensitivity_set(c, cov, prior, 10);
  const SensitivitySet s20 = sensitivity_set(c, cov, prior, 20);
  CHECK(rel_diff_max(s10.g11, s20.g11) < 1e-3);
  CHECK(rel_diff_max(s10.g12, s20.g12) < 1e-3);
  CHECK(rel_diff_max(s10.g21, s20.g21) < 1e-3);
  CHECK(rel_diff_max(s10.g22, s20.g22) < 1e-3);
}

TEST_CASE("quadrature matches a Monte-Carlo prior expectation") {
  std::mt19937_64 rng(29);
  const SystemConfig c = oracle::random_small_config(rng);
  const NoiseCovariance cov = noise_covariance(c);
  const ParamPrior prior{0.01 * c.T0, 0.01 * c.f0};
  const SensitivitySet s = sensitivity_set(c, cov, prior, 10);

  const int draws = 20000;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(c.K, c.K);
  Eigen::MatrixXd m2_re = Eigen::MatrixXd::Zero(c.K, c.K);
  Eigen::MatrixXd m2_im = Eigen::MatrixXd::Zero(c.K, c.K);
  for (int t = 0; t < draws; ++t) {
    const ChannelParams theta{prior.sigma_tau * normal(rng), prior.sigma_nu * normal(rng)};
    const auto [dtau, dnu] = channel_matrix_derivatives(c, theta);
    const Eigen::MatrixXcd g = dtau.adjoint() * Eigen::MatrixXcd(cov.solve(dtau));
    mean += g;
    m2_re += g.real().cwiseAbs2();
    m2_im += g.imag().cwiseAbs2();
  }
  mean /= draws;
  const double floor = 1e-12 * mean.cwiseAbs().maxCoeff();
  for (int a = 0; a < c.K; ++a) {
    for (int b = 0; b < c.K; ++b) {
      const double var_re =
          std::max(m2_re(a, b) / draws - std::pow(mean(a, b).real(), 2), 0.0);
      const double var_im =
          std::max(m2_im(a, b) / draws - std::pow(mean(a, b).imag(), 2), 0.0);
      CHECK(std::abs(mean(a, b).real() - s.g11(a, b).real()) <
            3.0 * std::sqrt(var_re / draws) + floor);
      CHECK(std::abs(mean(a, b).imag() - s.g11(a, b).imag()) <
            3.0 * std::sqrt(var_im / draws) + floor);
    }
  }
}

TEST_CASE("efim properties") {
  const SystemConfig c = medium_config();
  const NoiseCovariance cov = noise_covariance(c);
  const ParamPrior prior = reference_prior();
  const SensitivitySet s = sensitivity_set(c, cov, prior, 6);
  std::mt19937_64 rng(31);

  SECTION("zero spectrum") {
    CHECK(efim(s, zero_spectrum(c)).norm() == 0.0);
  }
  SECTION("agrees with the quadrature average of the fim") {
    const Spectrum x{oracle::random_unit_spectrum(c, rng, 1.0)};
    const GaussHermiteRule gh = gauss_hermite(s.order);
    const GaussianRule rt = gaussian_expectation_rule(gh, prior.sigma_tau);
    const GaussianRule rn = gaussian_expectation_rule(gh, prior.sigma_nu);
    InfoMatrix avg = InfoMatrix::Zero();
    for (int a = 0; a < s.order; ++a) {
      for (int b = 0; b < s.order; ++b) {
        avg += rt.weights[a] * rn.weights[b] *
               fim(c, cov, {rt.points[a], rn.points[b]}, x);
      }
    }
    CHECK(efim(s, x).isApprox(avg, 1e-10));
  }
  SECTION("PSD and symmetric on random spectra") {
    for (int t = 0; t < 5; ++t) {
      const InfoMatrix j = efim(s, Spectrum{oracle::random_unit_spectrum(c, rng, 1.0)});
      CHECK(j(0, 1) == j(1, 0));
      CHECK(j(0, 0) >= 0.0);
      CHECK(j(0, 0) * j(1, 1) >= j(0, 1) * j(0, 1) * (1.0 - 1e-10));
    }
  }
  SECTION("invariant under a global phase") {
    const Eigen::VectorXcd x = oracle::random_unit_spectrum(c, rng, 1.0);
    const InfoMatrix a = efim(s, Spectrum{x});
    const InfoMatrix b = efim(s, Spectrum{std::polar(1.0, 1.234) * x});
    CHECK(a.isApprox(b, 1e-12));
  }
  SECTION("scales linearly in 1/N0") {
    const Spectrum x{oracle::random_unit_spectrum(c, rng, 1.0)};
    const InfoMatrix a = efim(s, x);
    const InfoMatrix b = efim(s.rescaled_noise(5.0 * c.N0), x);
    CHECK(b.isApprox(a / 5.0, 1e-12));
  }
}

TEST_CASE("bim and bcrlb") {
  const SystemConfig c = medium_config();
  const NoiseCovariance cov = noise_covariance(c);
  const ParamPrior prior = reference_prior();
  const InfoMatrix pim = prior_information(prior);
  const SensitivitySet s = sensitivity_set(c, cov, prior, 6);
  std::mt19937_64 rng(37);

  SECTION("zero spectrum leaves only the prior") {
    const Eigen::Matrix2d bound = bcrlb(bim(efim(s, zero_spectrum(c)), pim));
    CHECK(bound(0, 0) == Approx(prior.sigma_tau * prior.sigma_tau));
    CHECK(bound(1, 1) == Approx(prior.sigma_nu * prior.sigma_nu));
  }
  SECTION("information never worsens the prior bound") {
    Eigen::Matrix2d r_theta = Eigen::Matrix2d::Zero();
    r_theta(0, 0) = prior.sigma_tau * prior.sigma_tau;
    r_theta(1, 1) = prior.sigma_nu * prior.sigma_nu;
    for (int t = 0; t < 5; ++t) {
      const Eigen::Matrix2d bound =
          bcrlb(bim(efim(s, Spectrum{oracle::random_unit_spectrum(c, rng, 1.0)}), pim));
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(r_theta - bound);
      CHECK(es.eigenvalues().minCoeff() > -1e-12 * r_theta.norm());
    }
  }
  SECTION("bound shrinks monotonically with transmit power") {
    const Spectrum base{oracle::random_unit_spectrum(c, rng, 1.0)};
    double prev_tau = std::numeric_limits<double>::infinity();
    double prev_nu = std::numeric_limits<double>::infinity();
    for (double p = 0.1; p <= 10.0; p *= 1.8) {
      const Spectrum x{std::sqrt(p) * base.coefficients};
      const Eigen::Matrix2d bound = bcrlb(bim(efim(s, x), pim));
      CHECK(bound(0, 0) < prev_tau);
      CHECK(bound(1, 1) < prev_nu);
      prev_tau = bound(0, 0);
      prev_nu = bound(1, 1);
    }
  }
  SECTION("singular information is rejected") {
    CHECK_THROWS_AS(bcrlb(InfoMatrix::Zero()), NumericalError);
  }
}
