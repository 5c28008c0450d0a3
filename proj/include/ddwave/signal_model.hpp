#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "ddwave/types.hpp"

namespace ddwave {

// Diagonal factors of the channel matrix, returned as vectors. The matrix
// operations below wrap them for callers that want the full factorization
// C = gamma * sqrt(N) * D(nu) * W^H * T(tau) * H(nu).

/// Doppler modulation phases, entry n: exp(+j*2*pi*n*nu*Ts), n = -N/2..N/2-1.
inline Eigen::VectorXcd doppler_diag(const SystemConfig& c, double nu) {
  Eigen::VectorXcd d(c.N);
  const double step = 2.0 * std::numbers::pi * nu * c.Ts();
  for (int m = 0; m < c.N; ++m) d[m] = std::polar(1.0, step * c.sample(m));
  return d;
}

/// Delay phases, entry k: exp(-j*k*omega0*tau), k = -K/2..K/2-1.
inline Eigen::VectorXcd delay_diag(const SystemConfig& c, double tau) {
  Eigen::VectorXcd t(c.K);
  for (int j = 0; j < c.K; ++j) t[j] = std::polar(1.0, -c.harmonic(j) * c.omega0 * tau);
  return t;
}

/// Ideal low-pass receive filter sampled at the Doppler-shifted harmonics:
/// entry k is 1 iff |k*f0 + nu| <= B/2 (closed passband, band edges included).
/// The comparison carries a 1e-9 * B slack so that exact band-edge harmonics
/// stay included under floating-point noise in k * f0.
inline Eigen::VectorXd filter_diag(const SystemConfig& c, double nu) {
  Eigen::VectorXd h(c.K);
  const double edge = 0.5 * c.B + 1e-9 * c.B;
  for (int j = 0; j < c.K; ++j) {
    h[j] = std::abs(c.harmonic(j) * c.f0 + nu) <= edge ? 1.0 : 0.0;
  }
  return h;
}

inline Eigen::MatrixXcd doppler_matrix(const SystemConfig& c, double nu) {
  return Eigen::MatrixXcd(doppler_diag(c, nu).asDiagonal());
}

inline Eigen::MatrixXcd delay_matrix(const SystemConfig& c, double tau) {
  return Eigen::MatrixXcd(delay_diag(c, tau).asDiagonal());
}

inline Eigen::MatrixXd filter_matrix(const SystemConfig& c, double nu) {
  return Eigen::MatrixXd(filter_diag(c, nu).asDiagonal());
}

/// Tall DFT matrix, K x N: [W]_{kn} = exp(-j*2*pi*k*n/N) / sqrt(N) with
/// k = -K/2..K/2-1, n = -N/2..N/2-1. For K > N its adjoint folds
/// super-Nyquist harmonics onto aliased digital frequencies.
inline Eigen::MatrixXcd dft_matrix(const SystemConfig& c) {
  Eigen::MatrixXcd w(c.K, c.N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.N));
  const double step = 2.0 * std::numbers::pi / c.N;
  for (int i = 0; i < c.K; ++i) {
    for (int j = 0; j < c.N; ++j) {
      w(i, j) = scale * std::polar(1.0, -step * c.harmonic(i) * c.sample(j));
    }
  }
  return w;
}

/// Channel matrix C(theta) = gamma*sqrt(N)*D(nu)*W^H*T(tau)*H(nu), N x K,
/// assembled entrywise: C[n,k] = gamma * e^{j2pi nu n Ts} * e^{j2pi kn/N}
/// * e^{-jk omega0 tau} * 1{|k f0 + nu| <= B/2}.
inline Eigen::MatrixXcd channel_matrix(const SystemConfig& c, const ChannelParams& theta) {
  check_finite(theta);
  const Eigen::VectorXcd dop = doppler_diag(c, theta.nu);
  const Eigen::VectorXcd del = delay_diag(c, theta.tau);
  const Eigen::VectorXd fil = filter_diag(c, theta.nu);
  Eigen::MatrixXcd m(c.N, c.K);
  const double step = 2.0 * std::numbers::pi / c.N;
  for (int j = 0; j < c.K; ++j) {
    const cplx col = c.gamma * del[j] * fil[j];
    const int k = c.harmonic(j);
    for (int i = 0; i < c.N; ++i) {
      m(i, j) = col * dop[i] * std::polar(1.0, step * k * c.sample(i));
    }
  }
  return m;
}

/// Analytic derivatives (dC/dtau, dC/dnu). The ideal low-pass response is
/// piecewise constant in nu, so its contribution dH/dnu is identically zero
/// away from the band-edge set.
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> channel_matrix_derivatives(
    const SystemConfig& c, const ChannelParams& theta) {
  check_finite(theta);
  const Eigen::VectorXcd dop = doppler_diag(c, theta.nu);
  const Eigen::VectorXcd del = delay_diag(c, theta.tau);
  const Eigen::VectorXd fil = filter_diag(c, theta.nu);
  Eigen::MatrixXcd dtau(c.N, c.K);
  Eigen::MatrixXcd dnu(c.N, c.K);
  const double step = 2.0 * std::numbers::pi / c.N;
  const double two_pi_ts = 2.0 * std::numbers::pi * c.Ts();
  for (int j = 0; j < c.K; ++j) {
    const int k = c.harmonic(j);
    const cplx col = c.gamma * del[j] * fil[j];
    const cplx col_tau = col * cplx(0, -k * c.omega0);
    for (int i = 0; i < c.N; ++i) {
      const cplx base = dop[i] * std::polar(1.0, step * k * c.sample(i));
      dtau(i, j) = col_tau * base;
      dnu(i, j) = col * cplx(0, two_pi_ts * c.sample(i)) * base;
    }
  }
  return {std::move(dtau), std::move(dnu)};
}

/// Noiseless sampled receive vector v(theta) = C(theta) * x.
inline Eigen::VectorXcd noiseless_receive(const SystemConfig& c,
                                          const ChannelParams& theta,
                                          const Spectrum& x) {
  check_spectrum(c, x);
  return channel_matrix(c, theta) * x.coefficients;
}

}  // namespace ddwave
