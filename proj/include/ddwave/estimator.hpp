#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ddwave/fisher.hpp"
#include "ddwave/noise_model.hpp"
#include "ddwave/parallel.hpp"
#include "ddwave/signal_model.hpp"
#include "ddwave/types.hpp"

namespace ddwave {

/// Search geometry of the hybrid ML-MAP estimator: a coarse grid spanning
/// +/- span_sigmas prior deviations per axis, then local grids around the
/// incumbent whose cell size shrinks by refine_contraction each round.
struct EstimatorConfig {
  double span_sigmas_tau = 4.0;
  double span_sigmas_nu = 4.0;
  int points_tau = 61;
  int points_nu = 61;
  int refine_rounds = 6;
  int refine_contraction = 5;
};

inline void check_estimator_config(const EstimatorConfig& ec) {
  if (!(ec.span_sigmas_tau > 0) || !(ec.span_sigmas_nu > 0))
    throw ConfigError("estimator grid spans must be positive");
  if (ec.points_tau < 2 || ec.points_nu < 2)
    throw ConfigError("estimator grid needs at least 2 points per dimension");
  if (ec.refine_rounds < 0) throw ConfigError("refinement rounds must be >= 0");
  if (ec.refine_contraction < 2) throw ConfigError("refinement contraction must be >= 2");
}

struct TrialResult {
  ChannelParams truth;
  ChannelParams estimate;
  cplx gamma_hat{0, 0};
  double sq_err_tau = 0;
  double sq_err_nu = 0;
};

/// Closed-form profile ML estimate of the channel gain for fixed theta, with
/// s(theta) = C(theta) x evaluated at gamma = 1:
///   gamma_hat = s^H R^{-1} y / (s^H R^{-1} s).
inline cplx gamma_ml(const SystemConfig& c, const NoiseCovariance& cov,
                     const ChannelParams& theta, const Spectrum& x,
                     const Eigen::VectorXcd& y) {
  check_spectrum(c, x);
  if (y.size() != c.N) throw ConfigError("receive vector length does not match N");
  const Eigen::VectorXcd s =
      (channel_matrix(c, theta) * x.coefficients) / c.gamma;
  const Eigen::VectorXcd z = cov.solve_base(s);
  const double den = z.dot(s).real();
  if (!(den > 0)) {
    throw NumericalError("zero signal energy at this theta; gain is unidentifiable");
  }
  return z.dot(y) / den;
}

/// Grid-plus-refinement maximizer of the profiled ML-MAP objective
///   L(theta) = |s^H R^{-1} y|^2 / (s^H R^{-1} s) - theta^T R_theta^{-1} theta / 2,
/// with the gain profiled out in closed form. The coarse matched-filter bank
/// is precomputed once and shared across trials; only the noise power varies
/// between calls.
class MlMapEstimator {
 public:
  struct Estimate {
    ChannelParams theta;
    cplx gamma{0, 0};
    double objective = 0;
    std::vector<double> round_objectives;  ///< incumbent after coarse + each round
  };

  MlMapEstimator(const SystemConfig& c, const NoiseCovariance& cov,
                 const ParamPrior& prior, const Spectrum& x, const EstimatorConfig& ec)
      : config_(c), prior_(prior), ec_(ec), x_(x.coefficients) {
    check_spectrum(c, x);
    check_estimator_config(ec);
    if (cov.size() != c.N) throw ConfigError("noise covariance size does not match N");
    if (!(prior.sigma_tau > 0) || !(prior.sigma_nu > 0))
      throw ConfigError("prior standard deviations must be positive");
    scale_ = cov.scale();
    chol_ = cov.base_cholesky();

    phase_.resize(c.N, c.K);
    const double step = 2.0 * std::numbers::pi / c.N;
    for (int j = 0; j < c.K; ++j) {
      for (int i = 0; i < c.N; ++i) {
        phase_(i, j) = std::polar(1.0, step * c.harmonic(j) * c.sample(i));
      }
    }

    tau_grid_ = axis(ec.span_sigmas_tau * prior.sigma_tau, ec.points_tau);
    nu_grid_ = axis(ec.span_sigmas_nu * prior.sigma_nu, ec.points_nu);
    cell_tau_ = tau_grid_[1] - tau_grid_[0];
    cell_nu_ = nu_grid_[1] - nu_grid_[0];

    const int grid = ec.points_tau * ec.points_nu;
    bank_.resize(c.N, grid);
    bank_den_.resize(grid);
    prior_quad_.resize(grid);
    for (int vi = 0; vi < ec.points_nu; ++vi) {
      Eigen::MatrixXcd block = whitened_block(tau_grid_, nu_grid_[vi]);
      const int col0 = vi * ec.points_tau;
      bank_.middleCols(col0, ec.points_tau) = block;
      for (int ti = 0; ti < ec.points_tau; ++ti) {
        bank_den_[col0 + ti] = block.col(ti).squaredNorm();
        prior_quad_[col0 + ti] = prior_quad(tau_grid_[ti], nu_grid_[vi]);
      }
    }
  }

  /// Noiseless receive signal at gamma = 1 for arbitrary theta.
  Eigen::VectorXcd signal(const ChannelParams& theta) const {
    check_finite(theta);
    const Eigen::VectorXcd g = delay_diag(config_, theta.tau).cwiseProduct(
        filter_diag(config_, theta.nu).cast<cplx>().cwiseProduct(x_));
    Eigen::VectorXcd s = phase_ * g;
    return doppler_diag(config_, theta.nu).cwiseProduct(s);
  }

  Estimate estimate(const Eigen::VectorXcd& y) const { return estimate(y, scale_); }

  /// noise_power overrides N0*B of the covariance the bank was built with.
  Estimate estimate(const Eigen::VectorXcd& y, double noise_power) const {
    if (y.size() != config_.N) throw ConfigError("receive vector length does not match N");
    if (!(noise_power > 0)) throw ConfigError("noise power must be positive");

    Eigen::VectorXcd wy(config_.N);
    wy.real() = chol_.triangularView<Eigen::Lower>().solve(Eigen::VectorXd(y.real()));
    wy.imag() = chol_.triangularView<Eigen::Lower>().solve(Eigen::VectorXd(y.imag()));

    Estimate est;
    const Eigen::VectorXcd corr = bank_.adjoint() * wy;
    int best = 0;
    double best_l = -std::numeric_limits<double>::infinity();
    cplx best_num = 0;
    double best_den = 0;
    for (int g = 0; g < corr.size(); ++g) {
      const double den = bank_den_[g];
      const double data = den > 0 ? std::norm(corr[g]) / (den * noise_power) : 0.0;
      const double l = data - prior_quad_[g];
      if (l > best_l) {
        best_l = l;
        best = g;
        best_num = corr[g];
        best_den = den;
      }
    }
    double tau_hat = tau_grid_[best % ec_.points_tau];
    double nu_hat = nu_grid_[best / ec_.points_tau];
    est.round_objectives.push_back(best_l);

    double win_tau = cell_tau_;
    double win_nu = cell_nu_;
    const int side = 2 * ec_.refine_contraction + 1;
    for (int round = 0; round < ec_.refine_rounds; ++round) {
      const std::vector<double> taus = centered_axis(tau_hat, win_tau, side);
      const std::vector<double> nus = centered_axis(nu_hat, win_nu, side);
      for (int vi = 0; vi < side; ++vi) {
        const Eigen::MatrixXcd block = whitened_block(taus, nus[vi]);
        const Eigen::VectorXcd bc = block.adjoint() * wy;
        for (int ti = 0; ti < side; ++ti) {
          const double den = block.col(ti).squaredNorm();
          const double data = den > 0 ? std::norm(bc[ti]) / (den * noise_power) : 0.0;
          const double l = data - prior_quad(taus[ti], nus[vi]);
          if (l > best_l) {
            best_l = l;
            tau_hat = taus[ti];
            nu_hat = nus[vi];
            best_num = bc[ti];
            best_den = den;
          }
        }
      }
      est.round_objectives.push_back(best_l);
      win_tau /= ec_.refine_contraction;
      win_nu /= ec_.refine_contraction;
    }

    est.theta = ChannelParams{tau_hat, nu_hat};
    est.objective = best_l;
    est.gamma = best_den > 0 ? best_num / best_den : cplx(0, 0);
    return est;
  }

 private:
  // Index-offset form keeps odd grids exactly symmetric with a 0.0 center.
  static std::vector<double> axis(double half_span, int points) {
    std::vector<double> v(points);
    const double step = half_span / (points - 1);
    for (int i = 0; i < points; ++i) v[i] = (2 * i - (points - 1)) * step;
    return v;
  }

  static std::vector<double> centered_axis(double center, double half_span, int points) {
    std::vector<double> v(points);
    const double step = half_span / (points - 1);
    for (int i = 0; i < points; ++i) v[i] = center + (2 * i - (points - 1)) * step;
    return v;
  }

  double prior_quad(double tau, double nu) const {
    const double a = tau / prior_.sigma_tau;
    const double b = nu / prior_.sigma_nu;
    return 0.5 * (a * a + b * b);
  }

  /// Whitened signal columns L^{-1} s(tau_i, nu) for a fixed Doppler shift.
  Eigen::MatrixXcd whitened_block(const std::vector<double>& taus, double nu) const {
    const int cols = static_cast<int>(taus.size());
    const Eigen::VectorXcd masked =
        filter_diag(config_, nu).cast<cplx>().cwiseProduct(x_);
    Eigen::MatrixXcd g(config_.K, cols);
    for (int t = 0; t < cols; ++t) {
      g.col(t) = delay_diag(config_, taus[t]).cwiseProduct(masked);
    }
    Eigen::MatrixXcd s = phase_ * g;
    const Eigen::VectorXcd dop = doppler_diag(config_, nu);
    s.array().colwise() *= dop.array();
    Eigen::MatrixXcd w(config_.N, cols);
    w.real() = chol_.triangularView<Eigen::Lower>().solve(s.real().eval());
    w.imag() = chol_.triangularView<Eigen::Lower>().solve(s.imag().eval());
    return w;
  }

  SystemConfig config_;
  ParamPrior prior_;
  EstimatorConfig ec_;
  Eigen::VectorXcd x_;
  Eigen::MatrixXcd phase_;  // N x K entries exp(j 2 pi k n / N)
  Eigen::MatrixXd chol_;    // lower Cholesky factor of Sigma0
  double scale_ = 0;        // N0 * B of the construction covariance
  std::vector<double> tau_grid_, nu_grid_;
  double cell_tau_ = 0, cell_nu_ = 0;
  Eigen::MatrixXcd bank_;          // whitened coarse signals, N x G
  Eigen::VectorXd bank_den_;       // s^H Sigma0^{-1} s per coarse node
  Eigen::VectorXd prior_quad_;     // quadratic prior penalty per coarse node
};

/// One-shot hybrid ML-MAP estimate of (gamma, theta).
inline MlMapEstimator::Estimate ml_map_estimate(const SystemConfig& c,
                                                const NoiseCovariance& cov,
                                                const ParamPrior& prior,
                                                const Spectrum& x,
                                                const Eigen::VectorXcd& y,
                                                const EstimatorConfig& ec) {
  return MlMapEstimator(c, cov, prior, x, ec).estimate(y);
}

struct NmseRow {
  double snr_db = 0;
  double nmse_tau = 0;
  double nmse_nu = 0;
  double bcrlb_tau_norm = 0;
  double bcrlb_nu_norm = 0;
};

namespace detail {

inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t snr_index,
                                 std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(snr_index), static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Monte-Carlo NMSE sweep. Each SNR value sets N0 = P / (B * SNR); the
/// config's own N0 is ignored. Per-trial seeds derive from (seed, snr index,
/// trial index), and error sums are accumulated in trial order, so results
/// are identical for any thread count.
inline std::vector<NmseRow> monte_carlo_nmse(const SystemConfig& c, const ParamPrior& prior,
                                             const Spectrum& x, const EstimatorConfig& ec,
                                             const std::vector<double>& snr_db, int trials,
                                             std::uint64_t seed, int threads = 0,
                                             int quad_order = 10, cplx gamma_sim = cplx(1, 0)) {
  if (trials < 1) throw ConfigError("trial count must be >= 1");
  if (snr_db.empty()) throw ConfigError("SNR list must not be empty");
  check_spectrum(c, x);

  SystemConfig unit = c;
  unit.N0 = c.P / c.B;  // SNR = 1 baseline; everything rescales per SNR point
  const NoiseCovariance cov = noise_covariance(unit);
  const MlMapEstimator bank(unit, cov, prior, x, ec);
  const SensitivitySet sens = sensitivity_set(unit, cov, prior, quad_order, threads);
  const InfoMatrix jd_unit = efim(sens, x);
  const InfoMatrix pim = prior_information(prior);
  const Eigen::MatrixXd chol = cov.base_cholesky();

  std::vector<NmseRow> rows;
  rows.reserve(snr_db.size());
  for (std::size_t si = 0; si < snr_db.size(); ++si) {
    const double snr = std::pow(10.0, snr_db[si] / 10.0);
    const double noise_power = c.P / snr;  // N0 * B at this SNR
    const Eigen::Matrix2d bound = bcrlb(bim(InfoMatrix(snr * jd_unit), pim));

    std::vector<TrialResult> results(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
      auto rng = detail::trial_rng(seed, si, t);
      std::normal_distribution<double> normal(0.0, 1.0);
      const ChannelParams truth{prior.sigma_tau * normal(rng),
                                prior.sigma_nu * normal(rng)};
      Eigen::VectorXcd noise(c.N);
      const double w_sigma = std::numbers::sqrt2 / 2.0;
      for (int i = 0; i < c.N; ++i) {
        noise[i] = cplx(w_sigma * normal(rng), w_sigma * normal(rng));
      }
      Eigen::VectorXcd y = gamma_sim * bank.signal(truth);
      y.real() += std::sqrt(noise_power) * (chol * noise.real());
      y.imag() += std::sqrt(noise_power) * (chol * noise.imag());
      const auto est = bank.estimate(y, noise_power);
      TrialResult& r = results[t];
      r.truth = truth;
      r.estimate = est.theta;
      r.gamma_hat = est.gamma;
      r.sq_err_tau = (est.theta.tau - truth.tau) * (est.theta.tau - truth.tau);
      r.sq_err_nu = (est.theta.nu - truth.nu) * (est.theta.nu - truth.nu);
    });

    double sum_tau = 0, sum_nu = 0;
    for (int t = 0; t < trials; ++t) {
      sum_tau += results[t].sq_err_tau;
      sum_nu += results[t].sq_err_nu;
    }
    NmseRow row;
    row.snr_db = snr_db[si];
    row.nmse_tau = sum_tau / trials / (prior.sigma_tau * prior.sigma_tau);
    row.nmse_nu = sum_nu / trials / (prior.sigma_nu * prior.sigma_nu);
    row.bcrlb_tau_norm = bound(0, 0) / (prior.sigma_tau * prior.sigma_tau);
    row.bcrlb_nu_norm = bound(1, 1) / (prior.sigma_nu * prior.sigma_nu);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ddwave
