#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "tiltbench/dataset.hpp"
#include "tiltbench/rng.hpp"
#include "tiltbench/tilt_params.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

enum class DesignKind { well_specified, misspecified };

/// Two-component bivariate Gaussian mixture design:
///   R ~ ber(1/2), Y | R=r ~ ber(pi_{1|r}), X | Y=y, R=r ~ N2(mu_{r,y}, s^2 I).
/// well_specified shares the scale across arms (s = sigma0 for y=0, sigma1
/// for y=1), which makes log omega(x, y) exactly linear in x. misspecified
/// uses sigma_{1,1} = sigma1, sigma_{1,0} = 1, sigma_{0,1} = 1,
/// sigma_{0,0} = sigma1, so the identity-feature tilt is wrong whenever
/// sigma1 != 1. The two designs coincide at sigma1 = 1.
struct SimDesign {
  DesignKind kind = DesignKind::well_specified;
  double sigma1 = 1.0;
  int n = 400;
  double pi_1_given_1 = 0.4;
  double pi_1_given_0 = 0.6;
  double sigma0 = 1.0;
  std::array<Eigen::Vector2d, 4> means;  // index 2r + y
  std::uint64_t seed = 0;

  SimDesign() {
    for (int r = 0; r < 2; ++r)
      for (int y = 0; y < 2; ++y)
        means[static_cast<std::size_t>(2 * r + y)] =
            Eigen::Vector2d((2 * y - 1) * (1 - 2 * r), 2 * (2 * y - 1));
  }

  static SimDesign well(double sigma1, int n, std::uint64_t seed) {
    SimDesign d;
    d.kind = DesignKind::well_specified;
    d.sigma1 = sigma1;
    d.n = n;
    d.seed = seed;
    return d;
  }

  static SimDesign miss(double sigma1, int n, std::uint64_t seed) {
    SimDesign d = well(sigma1, n, seed);
    d.kind = DesignKind::misspecified;
    return d;
  }

  const Eigen::Vector2d& mean(int r, int y) const {
    return means[static_cast<std::size_t>(2 * r + y)];
  }

  double sigma(int r, int y) const {
    if (kind == DesignKind::well_specified) return y == 1 ? sigma1 : sigma0;
    if (r == 1) return y == 1 ? sigma1 : 1.0;
    return y == 1 ? 1.0 : sigma1;
  }

  double pi_y1(int r) const { return r == 1 ? pi_1_given_1 : pi_1_given_0; }
};

inline MnarDataset generate(const SimDesign& design) {
  if (design.n < 1) throw std::invalid_argument("generate: n must be >= 1");
  Rng rng(design.seed);
  Eigen::MatrixXd X(design.n, 2);
  Eigen::VectorXi y(design.n), r(design.n);
  for (int i = 0; i < design.n; ++i) {
    const int ri = rng.bernoulli(0.5) ? 1 : 0;
    const int yi = rng.bernoulli(design.pi_y1(ri)) ? 1 : 0;
    const double s = design.sigma(ri, yi);
    const Eigen::Vector2d& mu = design.mean(ri, yi);
    X(i, 0) = mu[0] + s * rng.normal();
    X(i, 1) = mu[1] + s * rng.normal();
    r[i] = ri;
    y[i] = ri == 1 ? yi : 0;  // outcomes default to zero when missing
  }
  return make_dataset(std::move(X), std::move(y), std::move(r));
}

/// Draws m labelled points from the law of (X, Y) | R = 1 by rejection
/// sampling the full design; used for the separate classifier sample.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> sample_observed_arm(const SimDesign& design,
                                                                       int m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(m, 2);
  Eigen::VectorXd y(m);
  int k = 0;
  while (k < m) {
    const int ri = rng.bernoulli(0.5) ? 1 : 0;
    const int yi = rng.bernoulli(design.pi_y1(ri)) ? 1 : 0;
    const double s = design.sigma(ri, yi);
    const Eigen::Vector2d& mu = design.mean(ri, yi);
    const double x0 = mu[0] + s * rng.normal();
    const double x1 = mu[1] + s * rng.normal();
    if (ri != 1) continue;
    X(k, 0) = x0;
    X(k, 1) = x1;
    y[k] = yi;
    ++k;
  }
  return {X, y};
}

namespace detail {

inline double log_gaussian2(const Eigen::Vector2d& x, const Eigen::Vector2d& mu, double sigma) {
  const double c = -std::log(2.0 * 3.14159265358979323846) - 2.0 * std::log(sigma);
  return c - (x - mu).squaredNorm() / (2.0 * sigma * sigma);
}

}  // namespace detail

/// Closed-form quantities for a design: the joint and conditional densities,
/// the exact log importance weight, eta1, and m0. All follow directly from
/// the Gaussian mixture algebra.
struct DesignOracle {
  SimDesign design;

  // log p(x, y | R = r)
  double log_joint(const Eigen::Vector2d& x, int y, int r) const {
    const double prior = y == 1 ? design.pi_y1(r) : 1.0 - design.pi_y1(r);
    return std::log(prior) + detail::log_gaussian2(x, design.mean(r, y), design.sigma(r, y));
  }

  double log_omega(const Eigen::Vector2d& x, int y) const {
    return log_joint(x, y, 0) - log_joint(x, y, 1);
  }

  // P(Y = 1 | X = x, R = r)
  double posterior_y1(const Eigen::Vector2d& x, int r) const {
    return sigmoid(log_joint(x, 1, r) - log_joint(x, 0, r));
  }

  double eta1(const Eigen::Vector2d& x) const { return posterior_y1(x, 1); }
  double m0(const Eigen::Vector2d& x) const { return posterior_y1(x, 0); }
};

inline DesignOracle design_oracle(const SimDesign& design) { return DesignOracle{design}; }

/// Analytic eta1 via the explicit log-odds form
///   c + |x - mu_{1,0}|^2 / (2 sigma_{1,0}^2) - |x - mu_{1,1}|^2 / (2 sigma_{1,1}^2),
///   c = logit(pi_{1|1}) + 2 log(sigma_{1,0} / sigma_{1,1}).
inline double oracle_eta1(const SimDesign& design, const Eigen::Vector2d& x) {
  const double s1 = design.sigma(1, 1);
  const double s0 = design.sigma(1, 0);
  const double c = std::log(design.pi_1_given_1 / (1.0 - design.pi_1_given_1)) +
                   2.0 * std::log(s0 / s1);
  const double log_odds = c + (x - design.mean(1, 0)).squaredNorm() / (2.0 * s0 * s0) -
                          (x - design.mean(1, 1)).squaredNorm() / (2.0 * s1 * s1);
  return sigmoid(log_odds);
}

/// Exact tilt parameters for the well-specified design:
///   beta_y* = (mu_{0,y} - mu_{1,y}) / sigma_y^2,
///   alpha_y* = log(pi_{y|0} / pi_{y|1}) + (|mu_{1,y}|^2 - |mu_{0,y}|^2) / (2 sigma_y^2).
struct OracleTilt {
  TiltParams theta_star;
  SimDesign design;

  double eta1(const Eigen::Vector2d& x) const { return oracle_eta1(design, x); }
  double m0(const Eigen::Vector2d& x) const { return design_oracle(design).m0(x); }
  double log_omega(const Eigen::Vector2d& x, int y) const {
    return design_oracle(design).log_omega(x, y);
  }
};

inline OracleTilt oracle_tilt(const SimDesign& design) {
  if (design.kind != DesignKind::well_specified)
    throw std::invalid_argument("oracle_tilt: no linear oracle for the misspecified design");
  OracleTilt o;
  o.design = design;
  o.theta_star = TiltParams::zeros(2);
  for (int y = 0; y < 2; ++y) {
    const double s2 = design.sigma(0, y) * design.sigma(0, y);  // shared across r
    const Eigen::Vector2d m1 = design.mean(1, y);
    const Eigen::Vector2d m0 = design.mean(0, y);
    const double py0 = y == 1 ? design.pi_1_given_0 : 1.0 - design.pi_1_given_0;
    const double py1 = y == 1 ? design.pi_1_given_1 : 1.0 - design.pi_1_given_1;
    const double alpha = std::log(py0 / py1) + (m1.squaredNorm() - m0.squaredNorm()) / (2.0 * s2);
    const Eigen::Vector2d beta = (m0 - m1) / s2;
    if (y == 1) {
      o.theta_star.alpha1 = alpha;
      o.theta_star.beta1 = beta;
    } else {
      o.theta_star.alpha0 = alpha;
      o.theta_star.beta0 = beta;
    }
  }
  return o;
}

/// True values of the target functionals under any design.
inline double true_mu0(const SimDesign& d) { return d.pi_1_given_0; }
inline double true_mu(const SimDesign& d) { return 0.5 * (d.pi_1_given_0 + d.pi_1_given_1); }

/// Gauss-Hermite check that the tilted observed-arm mixture integrates to
/// one: sum_y E[exp(alpha_y + beta_y . X) 1{Y=y} | R=1]. For a linear tilt
/// of a Gaussian this quadrature is essentially exact at moderate order.
inline double tilted_mass_quadrature(const TiltParams& theta, const SimDesign& design,
                                     int nodes = 60);

namespace detail {

// nodes/weights for Gauss-Hermite via Golub-Welsch on the Jacobi matrix,
// computed with the symmetric tridiagonal eigensolver
inline void gauss_hermite(int m, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) {
    const double off = std::sqrt(static_cast<double>(i) / 2.0);
    J(i, i - 1) = off;
    J(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
  nodes = solver.eigenvalues();
  weights.resize(m);
  const double sqrt_pi = std::sqrt(3.14159265358979323846);
  for (int i = 0; i < m; ++i) {
    const double v = solver.eigenvectors()(0, i);
    weights[i] = sqrt_pi * v * v;
  }
}

}  // namespace detail

inline double tilted_mass_quadrature(const TiltParams& theta, const SimDesign& design, int nodes) {
  Eigen::VectorXd z, w;
  detail::gauss_hermite(nodes, z, w);
  const double inv_sqrt_pi_sq = 1.0 / 3.14159265358979323846;  // (1/sqrt(pi))^2
  double total = 0.0;
  for (int y = 0; y < 2; ++y) {
    const double prior = y == 1 ? design.pi_1_given_1 : 1.0 - design.pi_1_given_1;
    const double s = design.sigma(1, y);
    const Eigen::Vector2d& mu = design.mean(1, y);
    const Eigen::VectorXd& beta = theta.beta(y);
    double comp = 0.0;
    for (int i = 0; i < nodes; ++i) {
      const double x0 = mu[0] + std::sqrt(2.0) * s * z[i];
      double inner = 0.0;
      for (int j = 0; j < nodes; ++j) {
        const double x1 = mu[1] + std::sqrt(2.0) * s * z[j];
        inner += w[j] * std::exp(theta.alpha(y) + beta[0] * x0 + beta[1] * x1);
      }
      comp += w[i] * inner;
    }
    total += prior * comp * inv_sqrt_pi_sq;
  }
  return total;
}

}  // namespace tiltbench
