#pragma once

#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "ddwave/types.hpp"

namespace ddwave {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// Covariance of white noise of density N0 passed through the ideal low-pass
/// receive filter and sampled at fs:
///   [R]_{mn} = N0 * B * sinc(B * (m - n) * Ts).
/// Stored as a unit-diagonal Toeplitz base Sigma0 and the per-sample noise
/// power scale = N0 * B, so solves and draws can be rescaled without
/// refactorizing.
class NoiseCovariance {
 public:
  NoiseCovariance(Eigen::MatrixXd base, double scale, double loading)
      : base_(std::move(base)), scale_(scale), loading_(loading) {
    llt_.compute(base_);
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("noise covariance is not positive definite");
    }
  }

  int size() const { return static_cast<int>(base_.rows()); }
  double scale() const { return scale_; }
  double loading() const { return loading_; }

  /// Full covariance R = scale * Sigma0 (including any diagonal loading).
  Eigen::MatrixXd matrix() const { return scale_ * base_; }
  const Eigen::MatrixXd& base() const { return base_; }

  /// x = R^{-1} b.
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const {
    if (scale_ <= 0) throw NumericalError("noise covariance has zero power; cannot invert");
    return solve_base(rhs) / scale_;
  }

  /// x = Sigma0^{-1} b, the noise-power-free part of a whitening solve.
  Eigen::MatrixXcd solve_base(const Eigen::MatrixXcd& rhs) const {
    Eigen::MatrixXcd out(rhs.rows(), rhs.cols());
    out.real() = llt_.solve(rhs.real().eval());
    out.imag() = llt_.solve(rhs.imag().eval());
    return out;
  }

  /// Lower Cholesky factor of Sigma0.
  Eigen::MatrixXd base_cholesky() const { return llt_.matrixL(); }

 private:
  Eigen::MatrixXd base_;
  double scale_ = 0;
  double loading_ = 0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline NoiseCovariance noise_covariance(const SystemConfig& c) {
  Eigen::MatrixXd base(c.N, c.N);
  const double bts = c.B * c.Ts();
  for (int m = 0; m < c.N; ++m) {
    for (int n = 0; n < c.N; ++n) base(m, n) = sinc(bts * (m - n));
  }

  // Oversampled configurations (B < fs) make the sinc kernel near-singular.
  // Condition numbers beyond 1e12 get a diagonal loading of 1e-12 * N0 * B.
  double loading = 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(base, Eigen::EigenvaluesOnly);
  if (es.info() == Eigen::Success) {
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > lmax * 1e-12)) {
      loading = 1e-12;
      base.diagonal().array() += loading;
      std::cerr << "ddwave: noise covariance condition exceeds 1e12 "
                << "(B/fs = " << c.B / c.fs << "); applying diagonal loading\n";
    }
  }

  try {
    return NoiseCovariance(std::move(base), c.N0 * c.B, loading);
  } catch (const NumericalError&) {
    throw NumericalError("noise covariance is numerically singular even after loading");
  }
}

/// Circularly-symmetric complex Gaussian draw with the given covariance,
/// deterministic for a fixed seed.
inline Eigen::VectorXcd draw_noise(const NoiseCovariance& cov, std::uint64_t seed) {
  const int n = cov.size();
  if (cov.scale() == 0) return Eigen::VectorXcd::Zero(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::numbers::sqrt2 / 2.0);
  Eigen::VectorXcd w(n);
  for (int i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    w[i] = cplx(re, im);
  }
  const Eigen::MatrixXd l = cov.base_cholesky();
  Eigen::VectorXcd out(n);
  out.real() = l * w.real();
  out.imag() = l * w.imag();
  return std::sqrt(cov.scale()) * out;
}

}  // namespace ddwave
