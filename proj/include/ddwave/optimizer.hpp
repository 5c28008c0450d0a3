#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ddwave/fisher.hpp"
#include "ddwave/parallel.hpp"
#include "ddwave/types.hpp"

namespace ddwave {

/// Positive semi-definite 2x2 weighting M' of the trace objective
/// tr(M' * J_D).
struct Weighting {
  Eigen::Matrix2d m;
};

inline void check_weighting(const Weighting& w) {
  if (!w.m.allFinite()) throw ConfigError("weighting has non-finite entries");
  const double scale = w.m.cwiseAbs().maxCoeff();
  if (scale <= 0) throw ConfigError("weighting must not be the zero matrix");
  if (std::abs(w.m(0, 1) - w.m(1, 0)) > 1e-12 * scale) {
    throw ConfigError("weighting must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(w.m);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ConfigError("weighting must be positive semi-definite");
  }
}

/// Weighted channel sensitivity Gamma = sum_{ij} [M']_{ji} (Gamma_ij + Gamma_ji).
inline Eigen::MatrixXcd weighted_sensitivity(const SensitivitySet& s, const Weighting& w) {
  check_weighting(w);
  Eigen::MatrixXcd g = w.m(0, 0) * (s.g11 + s.g11.adjoint());
  g.noalias() += w.m(1, 1) * (s.g22 + s.g22.adjoint());
  // [M']_{21} weights Gamma_12 + Gamma_21 and [M']_{12} the identical
  // (2,1) pair, so the cross contribution enters twice.
  g.noalias() += (w.m(0, 1) + w.m(1, 0)) * (s.g12 + s.g21);
  return g;
}

namespace detail {

/// Rotates the global phase so the first significant entry is real positive.
inline Eigen::VectorXcd phase_canonical(Eigen::VectorXcd v) {
  const double tol = 1e-12 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > tol) {
      v *= std::conj(v[i]) / std::abs(v[i]);
      break;
    }
  }
  return v;
}

inline bool lex_greater(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i].real() != b[i].real()) return a[i].real() > b[i].real();
    if (a[i].imag() != b[i].imag()) return a[i].imag() > b[i].imag();
  }
  return false;
}

}  // namespace detail

struct PrincipalDesign {
  Eigen::VectorXcd vector;  ///< unit norm, phase-canonical
  double lambda_max = 0;
};

/// Principal eigenvector of a Hermitian sensitivity matrix. A degenerate top
/// eigenspace (relative gap below 1e-9) is resolved deterministically by
/// picking the lexicographically largest phase-canonical candidate.
inline PrincipalDesign principal_eigen_design(const Eigen::MatrixXcd& gamma_w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gamma_w);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigen decomposition of the weighted sensitivity failed");
  }
  const Eigen::Index n = gamma_w.rows();
  const double lmax = es.eigenvalues()[n - 1];
  Eigen::VectorXcd best = detail::phase_canonical(es.eigenvectors().col(n - 1));
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    if (lmax - es.eigenvalues()[i] > 1e-9 * std::abs(lmax)) break;
    Eigen::VectorXcd cand = detail::phase_canonical(es.eigenvectors().col(i));
    if (detail::lex_greater(cand, best)) best = std::move(cand);
  }
  return PrincipalDesign{std::move(best), lmax};
}

/// Transmit spectrum maximizing x^H Gamma(M') x under ||x||^2 <= P. The power
/// constraint is active: x* = sqrt(P) * principal eigenvector.
inline Spectrum optimize_spectrum(const SensitivitySet& s, const Weighting& w, double power) {
  if (!(power > 0)) throw ConfigError("transmit power must be positive");
  const PrincipalDesign d = principal_eigen_design(weighted_sensitivity(s, w));
  return Spectrum{std::sqrt(power) * d.vector};
}

/// GNSS-style rectangular reference for a full-rate system (B = fs): a
/// band-limited BPSK chip train at chip rate B/2 (null-to-null bandwidth B),
/// i.e. sinc-weighted flat magnitudes with a fixed pseudo-random code,
/// renormalized to transmit power P. Constant-envelope in time, which is what
/// makes it a meaningful Doppler baseline.
inline Spectrum reference_rect(const SystemConfig& c) {
  if (std::abs(c.B - c.fs) > 1e-9 * c.fs) {
    throw ConfigError("reference waveform requires a full-rate config with B = fs");
  }
  const int chips = c.N / 2;  // T0 * B/2, integral because N is even
  std::mt19937_64 rng(0x9d2c5680u);
  std::vector<double> code(chips);
  for (int m = 0; m < chips; ++m) code[m] = (rng() & 1) ? 1.0 : -1.0;

  const double tc = 2.0 / c.B;
  Eigen::VectorXcd x(c.K);
  for (int j = 0; j < c.K; ++j) {
    const int k = c.harmonic(j);
    cplx acc = 0;
    for (int m = 0; m < chips; ++m) {
      const double t_center = -0.5 * c.T0 + (m + 0.5) * tc;
      acc += code[m] * std::polar(1.0, -k * c.omega0 * t_center);
    }
    x[j] = acc * (tc / c.T0) * sinc(k * c.f0 * tc);
  }
  x *= std::sqrt(c.P / x.squaredNorm());
  return Spectrum{std::move(x)};
}

/// Everything needed to compare a candidate system against the conventional
/// full-rate design: its own config, covariance-derived sensitivities, the
/// reference waveform and its EFIM.
struct ReferenceSystem {
  SystemConfig config;
  SensitivitySet sensitivity;
  Spectrum spectrum;
  InfoMatrix jd;
};

/// Builds the full-rate reference system at sampling rate `rate` (B = fs =
/// rate) with the same noise density, power and channel gain as `like`.
inline ReferenceSystem make_reference_system(const SystemConfig& like, double rate,
                                             const ParamPrior& prior, int order,
                                             int threads = 0) {
  ReferenceSystem ref;
  ref.config = make_config(like.T0, rate, rate, like.N0, like.P, like.gamma);
  const NoiseCovariance cov = noise_covariance(ref.config);
  ref.sensitivity = sensitivity_set(ref.config, cov, prior, order, threads);
  ref.spectrum = reference_rect(ref.config);
  ref.jd = efim(ref.sensitivity, ref.spectrum);
  return ref;
}

struct ChiPair {
  double chi_tau_db = 0;
  double chi_nu_db = 0;
};

namespace detail {

inline Eigen::Matrix2d invert_efim(const InfoMatrix& jd) {
  const double det = jd(0, 0) * jd(1, 1) - jd(0, 1) * jd(1, 0);
  if (!(det > 0) || !std::isfinite(det)) {
    throw NumericalError("EFIM is singular; relative measure undefined");
  }
  Eigen::Matrix2d inv;
  inv(0, 0) = jd(1, 1) / det;
  inv(1, 1) = jd(0, 0) / det;
  inv(0, 1) = -jd(0, 1) / det;
  inv(1, 0) = inv(0, 1);
  return inv;
}

}  // namespace detail

/// chi_{tau/nu} = 10 log10([J_D^{-1}|ref]_{ii} / [J_D^{-1}|x]_{ii}). Both
/// spectra must carry their system's full transmit power.
inline ChiPair chi_relative(const SensitivitySet& s, const Spectrum& x,
                            const SensitivitySet& ref_s, const Spectrum& ref_x) {
  if (std::abs(x.power() - s.config.P) > 1e-6 * s.config.P) {
    throw ConfigError("candidate spectrum is not normalized to transmit power P");
  }
  if (std::abs(ref_x.power() - ref_s.config.P) > 1e-6 * ref_s.config.P) {
    throw ConfigError("reference spectrum is not normalized to transmit power P");
  }
  const Eigen::Matrix2d inv = detail::invert_efim(efim(s, x));
  const Eigen::Matrix2d inv_ref = detail::invert_efim(efim(ref_s, ref_x));
  return ChiPair{10.0 * std::log10(inv_ref(0, 0) / inv(0, 0)),
                 10.0 * std::log10(inv_ref(1, 1) / inv(1, 1))};
}

inline ChiPair chi_relative(const SensitivitySet& s, const Spectrum& x,
                            const ReferenceSystem& ref) {
  return chi_relative(s, x, ref.sensitivity, ref.spectrum);
}

/// One sample of the Pareto trade-off between delay and Doppler accuracy.
struct TradeoffPoint {
  double alpha = 0;
  Weighting weighting;
  Spectrum spectrum;
  double objective = 0;  ///< P * lambda_max of the weighted sensitivity
  double chi_tau_db = 0;
  double chi_nu_db = 0;
  InfoMatrix efim_m;
  Eigen::Matrix2d bcrlb_m;
};

/// Sweeps the diagonal weighting family M'(alpha) = diag(alpha * s_tau,
/// (1 - alpha) * s_nu) over a uniform alpha grid, with unit-balancing scales
/// s_tau = 1/tr(Gamma_11 + Gamma_11^H), s_nu = 1/tr(Gamma_22 + Gamma_22^H).
/// Returns points sorted by alpha with duplicates merged and strictly
/// dominated points removed.
inline std::vector<TradeoffPoint> pareto_sweep(const SensitivitySet& s,
                                               const ReferenceSystem& ref,
                                               int grid_size, int threads = 0) {
  if (grid_size < 2) throw ConfigError("pareto grid size must be >= 2");
  const double tr_tau = (s.g11 + s.g11.adjoint()).trace().real();
  const double tr_nu = (s.g22 + s.g22.adjoint()).trace().real();
  if (!(tr_tau > 0) || !(tr_nu > 0)) {
    throw NumericalError("sensitivity matrices have non-positive trace");
  }
  const double s_tau = 1.0 / tr_tau;
  const double s_nu = 1.0 / tr_nu;
  const double power = s.config.P;
  const InfoMatrix pim = prior_information(s.prior);

  std::vector<TradeoffPoint> pts(grid_size);
  parallel_for(grid_size, threads, [&](std::size_t i) {
    TradeoffPoint& p = pts[i];
    p.alpha = static_cast<double>(i) / (grid_size - 1);
    p.weighting.m = Eigen::Matrix2d::Zero();
    p.weighting.m(0, 0) = p.alpha * s_tau;
    p.weighting.m(1, 1) = (1.0 - p.alpha) * s_nu;
    const PrincipalDesign d = principal_eigen_design(weighted_sensitivity(s, p.weighting));
    p.spectrum = Spectrum{std::sqrt(power) * d.vector};
    p.objective = power * d.lambda_max;
    p.efim_m = efim(s, p.spectrum);
    p.bcrlb_m = bcrlb(bim(p.efim_m, pim));
    const ChiPair chi = chi_relative(s, p.spectrum, ref);
    p.chi_tau_db = chi.chi_tau_db;
    p.chi_nu_db = chi.chi_nu_db;
  });

  // Merge designs that are equal up to a global phase.
  std::vector<TradeoffPoint> unique;
  for (auto& p : pts) {
    bool dup = false;
    for (const auto& q : unique) {
      const double overlap =
          std::abs(q.spectrum.coefficients.dot(p.spectrum.coefficients));
      if (overlap / power > 1.0 - 1e-8) {
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(std::move(p));
  }

  // Drop points strictly dominated in both coordinates.
  std::vector<TradeoffPoint> frontier;
  for (const auto& p : unique) {
    bool dominated = false;
    for (const auto& q : unique) {
      if (q.chi_tau_db > p.chi_tau_db && q.chi_nu_db > p.chi_nu_db) {
        dominated = true;
        break;
      }
    }
    if (!dominated) frontier.push_back(p);
  }
  return frontier;
}

/// Index of the trade-off point farthest from the origin in the (chi_tau,
/// chi_nu) dB plane. Points in the non-negative quadrant are preferred; a
/// negative-gain coordinate only wins when no all-gain point exists.
inline std::size_t select_max_distance(const std::vector<TradeoffPoint>& pts) {
  if (pts.empty()) throw ConfigError("empty Pareto set");
  bool any_positive = false;
  for (const auto& p : pts) {
    if (p.chi_tau_db >= 0 && p.chi_nu_db >= 0) any_positive = true;
  }
  std::size_t best = 0;
  double best_norm = -1;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (any_positive && (pts[i].chi_tau_db < 0 || pts[i].chi_nu_db < 0)) continue;
    const double norm = std::hypot(pts[i].chi_tau_db, pts[i].chi_nu_db);
    if (norm > best_norm) {
      best_norm = norm;
      best = i;
    }
  }
  return best;
}

}  // namespace ddwave
