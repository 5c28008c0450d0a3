#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "ddwave/errors.hpp"

namespace ddwave {

using cplx = std::complex<double>;

/// Physical constants of one transmit/receive chain plus the derived sample
/// and harmonic counts. B may exceed fs; undersampled operation is the whole
/// point of the design problem.
struct SystemConfig {
  double T0 = 0;     ///< signal period [s]
  double fs = 0;     ///< receiver sampling rate [Hz]
  double B = 0;      ///< two-sided bandwidth of waveform and receive filter [Hz]
  double N0 = 0;     ///< noise power spectral density [W/Hz]
  double P = 0;      ///< transmit power budget [W]
  cplx gamma{1, 0};  ///< complex channel coefficient

  double f0 = 0;      ///< fundamental frequency 1/T0 [Hz]
  double omega0 = 0;  ///< 2*pi*f0 [rad/s]
  int N = 0;          ///< samples per period, even
  int K = 0;          ///< modeled harmonics, even

  double Ts() const { return 1.0 / fs; }

  /// Harmonic order k in [-K/2, K/2) for a 0-based coefficient index.
  int harmonic(int index) const { return index - K / 2; }
  /// Sample offset n in [-N/2, N/2) for a 0-based sample index.
  int sample(int index) const { return index - N / 2; }
};

inline SystemConfig make_config(double T0, double fs, double B, double N0,
                                double P, cplx gamma) {
  if (!(T0 > 0) || !std::isfinite(T0)) throw ConfigError("T0 must be a positive real");
  if (!(fs > 0) || !std::isfinite(fs)) throw ConfigError("fs must be a positive real");
  if (!(B > 0) || !std::isfinite(B)) throw ConfigError("B must be a positive real");
  if (!(N0 >= 0) || !std::isfinite(N0)) throw ConfigError("N0 must be finite and non-negative");
  if (!(P > 0) || !std::isfinite(P)) throw ConfigError("P must be a positive real");
  if (gamma == cplx(0, 0) || !std::isfinite(gamma.real()) || !std::isfinite(gamma.imag()))
    throw ConfigError("gamma must be a finite nonzero complex number");

  SystemConfig c;
  c.T0 = T0;
  c.fs = fs;
  c.B = B;
  c.N0 = N0;
  c.P = P;
  c.gamma = gamma;
  c.f0 = 1.0 / T0;
  c.omega0 = 2.0 * std::numbers::pi * c.f0;

  const double n_exact = T0 * fs;
  const long long n = std::llround(n_exact);
  if (n < 2 || std::abs(n_exact - static_cast<double>(n)) >
                   16.0 * std::numeric_limits<double>::epsilon() * n_exact) {
    throw ConfigError("T0*fs must be an integer sample count, got " +
                      std::to_string(n_exact));
  }
  if (n % 2 != 0) {
    throw ConfigError("sample count N = T0*fs must be even, got " + std::to_string(n));
  }
  if (n > (1LL << 24)) throw ConfigError("sample count N is unreasonably large");
  c.N = static_cast<int>(n);

  // K = smallest even integer >= B/f0. The filter indicator, not K, enforces
  // the exact band edge.
  const double ratio = B * T0;
  if (ratio > static_cast<double>(1LL << 24)) {
    throw ConfigError("harmonic count K = ceil(B/f0) overflows sane limits");
  }
  const long long near = std::llround(ratio);
  long long k = (std::abs(ratio - static_cast<double>(near)) <=
                 1e-9 * std::max(1.0, ratio))
                    ? near
                    : static_cast<long long>(std::ceil(ratio));
  if (k < 2) k = 2;
  if (k % 2 != 0) ++k;
  c.K = static_cast<int>(k);
  return c;
}

/// One delay-Doppler realization theta = (tau, nu).
struct ChannelParams {
  double tau = 0;  ///< delay [s]
  double nu = 0;   ///< Doppler shift [Hz]
};

inline void check_finite(const ChannelParams& theta) {
  if (!std::isfinite(theta.tau) || !std::isfinite(theta.nu))
    throw ConfigError("channel parameters must be finite");
}

/// Zero-mean Gaussian prior on (tau, nu) with independent components.
struct ParamPrior {
  double sigma_tau = 0;  ///< delay standard deviation [s]
  double sigma_nu = 0;   ///< Doppler standard deviation [Hz]
};

inline ParamPrior make_prior(double sigma_tau, double sigma_nu) {
  if (!(sigma_tau > 0) || !std::isfinite(sigma_tau))
    throw ConfigError("sigma_tau must be a positive real");
  if (!(sigma_nu > 0) || !std::isfinite(sigma_nu))
    throw ConfigError("sigma_nu must be a positive real");
  return ParamPrior{sigma_tau, sigma_nu};
}

/// Transmit Fourier coefficients. Storage is in ascending harmonic order:
/// coefficients[j] is X_k with k = j - K/2.
struct Spectrum {
  Eigen::VectorXcd coefficients;

  double power() const { return coefficients.squaredNorm(); }
  Eigen::Index size() const { return coefficients.size(); }
};

inline Spectrum zero_spectrum(const SystemConfig& c) {
  return Spectrum{Eigen::VectorXcd::Zero(c.K)};
}

/// All power on the single harmonic of order k.
inline Spectrum unit_harmonic(const SystemConfig& c, int k, double power) {
  if (k < -c.K / 2 || k >= c.K / 2) throw ConfigError("harmonic order out of range");
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(c.K);
  x[k + c.K / 2] = std::sqrt(power);
  return Spectrum{std::move(x)};
}

inline void check_spectrum(const SystemConfig& c, const Spectrum& x) {
  if (x.coefficients.size() != c.K) {
    throw ConfigError("spectrum length " + std::to_string(x.coefficients.size()) +
                      " does not match harmonic count K = " + std::to_string(c.K));
  }
  if (!x.coefficients.allFinite()) throw ConfigError("spectrum has non-finite entries");
}

}  // namespace ddwave
