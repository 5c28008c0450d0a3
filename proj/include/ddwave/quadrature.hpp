#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "ddwave/errors.hpp"

namespace ddwave {

/// Gauss-Hermite rule for integrals against exp(-x^2) over the real line.
/// Weights sum to sqrt(pi); the rule is exact for polynomials up to degree
/// 2*order - 1.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Golub-Welsch construction: nodes are the eigenvalues of the symmetric
/// tridiagonal Jacobi matrix of the Hermite recurrence, weights come from the
/// first eigenvector components.
inline GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw ConfigError("quadrature order must be >= 1");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub = Eigen::VectorXd::Zero(std::max(order - 1, 0));
  for (int i = 1; i < order; ++i) sub[i - 1] = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) {
    throw NumericalError("Gauss-Hermite Jacobi matrix eigen decomposition failed");
  }
  GaussHermiteRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights =
      std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).array().square();
  return rule;
}

/// Points and normalized weights for E[f(x)] with x ~ N(0, sigma^2):
/// x_i = sqrt(2) * sigma * q_i, weights sum to one.
struct GaussianRule {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;
};

inline GaussianRule gaussian_expectation_rule(const GaussHermiteRule& gh, double sigma) {
  GaussianRule r;
  r.points = std::numbers::sqrt2 * sigma * gh.nodes;
  r.weights = gh.weights / std::sqrt(std::numbers::pi);
  return r;
}

}  // namespace ddwave
