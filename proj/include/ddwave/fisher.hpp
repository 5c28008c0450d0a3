#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ddwave/noise_model.hpp"
#include "ddwave/parallel.hpp"
#include "ddwave/quadrature.hpp"
#include "ddwave/signal_model.hpp"
#include "ddwave/types.hpp"

namespace ddwave {

/// 2x2 information matrix in natural units: entry (0,0) is delay information
/// [1/s^2], (1,1) Doppler information [1/Hz^2].
using InfoMatrix = Eigen::Matrix2d;

/// Fisher information for fixed theta:
/// [J_F]_{ij} = 2 Re{ x^H (dC/dtheta_i)^H R^{-1} (dC/dtheta_j) x }.
inline InfoMatrix fim(const SystemConfig& c, const NoiseCovariance& cov,
                      const ChannelParams& theta, const Spectrum& x) {
  check_spectrum(c, x);
  if (cov.size() != c.N) throw ConfigError("noise covariance size does not match N");
  const auto [dtau, dnu] = channel_matrix_derivatives(c, theta);
  const Eigen::VectorXcd u1 = dtau * x.coefficients;
  const Eigen::VectorXcd u2 = dnu * x.coefficients;
  const Eigen::VectorXcd y1 = cov.solve(u1);
  const Eigen::VectorXcd y2 = cov.solve(u2);
  InfoMatrix j;
  j(0, 0) = 2.0 * u1.dot(y1).real();
  j(1, 1) = 2.0 * u2.dot(y2).real();
  j(0, 1) = 2.0 * u1.dot(y2).real();
  j(1, 0) = j(0, 1);
  return j;
}

/// Prior information matrix of the Gaussian prior: diag(1/sigma_tau^2, 1/sigma_nu^2).
inline InfoMatrix prior_information(const ParamPrior& prior) {
  if (!(prior.sigma_tau > 0) || !(prior.sigma_nu > 0))
    throw ConfigError("prior standard deviations must be positive");
  InfoMatrix j = InfoMatrix::Zero();
  j(0, 0) = 1.0 / (prior.sigma_tau * prior.sigma_tau);
  j(1, 1) = 1.0 / (prior.sigma_nu * prior.sigma_nu);
  return j;
}

/// The four K x K channel sensitivity matrices
/// Gamma_ij = E_theta[ (dC/dtheta_i)^H R^{-1} (dC/dtheta_j) ],
/// evaluated with a tensor-product Gauss-Hermite rule over the prior.
struct SensitivitySet {
  SystemConfig config;
  ParamPrior prior;
  int order = 0;  ///< Gauss-Hermite order per dimension
  Eigen::MatrixXcd g11, g12, g21, g22;

  /// Gammas scale as 1/N0; returns the set re-expressed for a different
  /// noise density.
  SensitivitySet rescaled_noise(double new_n0) const {
    if (!(new_n0 > 0)) throw ConfigError("N0 must be positive");
    SensitivitySet s = *this;
    const double f = config.N0 / new_n0;
    s.config.N0 = new_n0;
    s.g11 *= f;
    s.g12 *= f;
    s.g21 *= f;
    s.g22 *= f;
    return s;
  }
};

inline SensitivitySet sensitivity_set(const SystemConfig& c, const NoiseCovariance& cov,
                                      const ParamPrior& prior, int order,
                                      int threads = 0) {
  if (order < 1) throw ConfigError("quadrature order must be >= 1");
  if (cov.size() != c.N) throw ConfigError("noise covariance size does not match N");
  const GaussHermiteRule gh = gauss_hermite(order);
  const GaussianRule tau_rule = gaussian_expectation_rule(gh, prior.sigma_tau);
  const GaussianRule nu_rule = gaussian_expectation_rule(gh, prior.sigma_nu);

  const int total = order * order;
  // Fixed bucket layout keeps the floating-point summation order independent
  // of the worker count.
  const int buckets = std::min(total, 16);
  std::vector<std::array<Eigen::MatrixXcd, 4>> acc(buckets);
  for (auto& a : acc) {
    for (auto& m : a) m = Eigen::MatrixXcd::Zero(c.K, c.K);
  }

  parallel_for(buckets, threads, [&](std::size_t b) {
    for (int node = static_cast<int>(b); node < total; node += buckets) {
      const int a = node / order;
      const int v = node % order;
      const double w = tau_rule.weights[a] * nu_rule.weights[v];
      const ChannelParams theta{tau_rule.points[a], nu_rule.points[v]};
      const auto [dtau, dnu] = channel_matrix_derivatives(c, theta);
      const Eigen::MatrixXcd y1 = cov.solve(dtau);
      const Eigen::MatrixXcd y2 = cov.solve(dnu);
      acc[b][0].noalias() += w * (dtau.adjoint() * y1);
      acc[b][1].noalias() += w * (dtau.adjoint() * y2);
      acc[b][2].noalias() += w * (dnu.adjoint() * y1);
      acc[b][3].noalias() += w * (dnu.adjoint() * y2);
    }
  });

  SensitivitySet s;
  s.config = c;
  s.prior = prior;
  s.order = order;
  s.g11 = Eigen::MatrixXcd::Zero(c.K, c.K);
  s.g12 = Eigen::MatrixXcd::Zero(c.K, c.K);
  s.g21 = Eigen::MatrixXcd::Zero(c.K, c.K);
  s.g22 = Eigen::MatrixXcd::Zero(c.K, c.K);
  for (int b = 0; b < buckets; ++b) {
    s.g11 += acc[b][0];
    s.g12 += acc[b][1];
    s.g21 += acc[b][2];
    s.g22 += acc[b][3];
  }
  return s;
}

/// Expected Fisher information [J_D]_{ij} = x^H (Gamma_ij + Gamma_ji) x.
/// The quadratic forms are Hermitian; a relative imaginary residue above
/// 1e-9 signals a broken sensitivity construction and is rejected.
inline InfoMatrix efim(const SensitivitySet& s, const Spectrum& x) {
  check_spectrum(s.config, x);
  const Eigen::VectorXcd& v = x.coefficients;
  const cplx q11 = v.dot((s.g11 + s.g11.adjoint()) * v);
  const cplx q12 = v.dot((s.g12 + s.g21) * v);
  const cplx q22 = v.dot((s.g22 + s.g22.adjoint()) * v);
  const double scale = std::max({std::abs(q11), std::abs(q22), std::abs(q12)});
  for (const cplx q : {q11, q12, q22}) {
    if (std::abs(q.imag()) > 1e-9 * scale + 1e-300) {
      throw NumericalError("EFIM quadratic form has an imaginary residue; "
                           "sensitivity matrices violate Gamma_ij^H = Gamma_ji");
    }
  }
  InfoMatrix j;
  j(0, 0) = q11.real();
  j(0, 1) = q12.real();
  j(1, 0) = j(0, 1);
  j(1, 1) = q22.real();
  return j;
}

/// Bayesian information matrix J_B = J_D + J_P.
inline InfoMatrix bim(const InfoMatrix& efim_m, const InfoMatrix& pim) {
  return efim_m + pim;
}

/// BCRLB = J_B^{-1}.
inline Eigen::Matrix2d bcrlb(const InfoMatrix& bim_m) {
  const double det = bim_m(0, 0) * bim_m(1, 1) - bim_m(0, 1) * bim_m(1, 0);
  if (!(det > 0) || !std::isfinite(det)) {
    throw NumericalError("Bayesian information matrix is singular");
  }
  Eigen::Matrix2d inv;
  inv(0, 0) = bim_m(1, 1) / det;
  inv(1, 1) = bim_m(0, 0) / det;
  inv(0, 1) = -bim_m(0, 1) / det;
  inv(1, 0) = inv(0, 1);
  return inv;
}

}  // namespace ddwave
