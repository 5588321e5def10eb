#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "tiltbench/optim.hpp"
#include "tiltbench/tilt_fit.hpp"
#include "tiltbench/tilt_objective.hpp"

namespace tiltbench {

/// Profile log-likelihood of the tilt parameters after maximizing out the
/// point masses p_i and pi_r:
///   l_prof(theta) = sum_i [ -log(n1 + n0 kappa_i) + (1 - R_i) log kappa_i ],
/// kappa_i = eta_i exp(a1_i) + (1 - eta_i) exp(a0_i). Evaluated in the log
/// domain throughout.
inline double profile_likelihood(const TiltParams& th, const TiltProblem& problem) {
  const double log_n1 = std::log(static_cast<double>(problem.n_observed()));
  const double log_n0 = std::log(static_cast<double>(problem.n_missing()));
  Eigen::ArrayXd logk, l1, l0;
  problem.log_kappa(th, logk, l1, l0);
  double acc = 0.0;
  for (int i = 0; i < problem.n(); ++i) {
    acc -= logsumexp2(log_n1, log_n0 + logk[i]);
    if (!problem.observed(i)) acc += logk[i];
  }
  return acc;
}

inline double profile_likelihood(const TiltParams& th, const MnarDataset& ds,
                                 const Eigen::VectorXd& eta1_probs, const FeatureMap& fm) {
  return profile_likelihood(th, TiltProblem(ds, eta1_probs, fm));
}

/// Analytic gradient of l_prof; every exponential shows up as
/// exp(component - log-denominator), so nothing overflows.
inline TiltParams profile_likelihood_gradient(const TiltParams& th, const TiltProblem& problem) {
  const double log_n1 = std::log(static_cast<double>(problem.n_observed()));
  const double log_n0 = std::log(static_cast<double>(problem.n_missing()));
  Eigen::ArrayXd logk, l1, l0;
  problem.log_kappa(th, logk, l1, l0);

  TiltParams grad = TiltParams::zeros(problem.p());
  int k1 = 0, k0 = 0;
  for (int i = 0; i < problem.n(); ++i) {
    const double denom = logsumexp2(log_n1, log_n0 + logk[i]);
    // d/d(kappa components): -n0/(n1 + n0 kappa) + (1-R)/kappa, times dkappa
    double c1 = -std::exp(log_n0 + l1[i] - denom);
    double c0 = -std::exp(log_n0 + l0[i] - denom);
    if (!problem.observed(i)) {
      c1 += std::exp(l1[i] - logk[i]);
      c0 += std::exp(l0[i] - logk[i]);
    }
    grad.alpha1 += c1;
    grad.alpha0 += c0;
    const Eigen::VectorXd t = problem.observed(i)
                                  ? Eigen::VectorXd(problem.features_observed().row(k1))
                                  : Eigen::VectorXd(problem.features_missing().row(k0));
    if (problem.observed(i)) ++k1; else ++k0;
    grad.beta1 += c1 * t;
    grad.beta0 += c0 * t;
  }
  return grad;
}

/// Implied empirical-likelihood masses p_i = 1 / (n1 + n0 kappa_i).
inline Eigen::VectorXd implied_el_weights(const TiltParams& th, const TiltProblem& problem) {
  const double log_n1 = std::log(static_cast<double>(problem.n_observed()));
  const double log_n0 = std::log(static_cast<double>(problem.n_missing()));
  Eigen::ArrayXd logk, l1, l0;
  problem.log_kappa(th, logk, l1, l0);
  Eigen::VectorXd p(problem.n());
  for (int i = 0; i < problem.n(); ++i)
    p[i] = std::exp(-logsumexp2(log_n1, log_n0 + logk[i]));
  return p;
}

struct ElFitConfig {
  double tol = 1e-6;  // gradient infinity norm
  int max_iter = 10000;
  std::optional<TiltParams> theta_init;
};

/// Maximizes l_prof by gradient ascent with backtracking (minimizes -l_prof).
/// The result carries the implied masses in `el_weights`; at a stationary
/// point sum(p_i) and sum(p_i kappa_i) are both ~1.
inline TiltFitResult fit_empirical_likelihood(const TiltProblem& problem,
                                              const ElFitConfig& cfg = {}) {
  const int p = problem.p();
  TiltParams init = cfg.theta_init.value_or(TiltParams::zeros(p));
  GdOptions opts;
  opts.max_iter = cfg.max_iter;
  opts.tol = cfg.tol;
  GdResult r = minimize_gd(
      [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
        const TiltParams th = TiltParams::unflatten(v, p);
        grad = -profile_likelihood_gradient(th, problem).flatten();
        return -profile_likelihood(th, problem);
      },
      init.flatten(), opts);

  TiltFitResult res;
  res.theta = TiltParams::unflatten(r.x, p);
  res.converged = r.converged;
  res.iterations = r.iterations;
  res.final_objective = -r.value;  // profile log-likelihood
  res.final_constraint = problem.constraint(res.theta);
  res.el_weights = implied_el_weights(res.theta, problem);
  return res;
}

inline TiltFitResult fit_empirical_likelihood(const MnarDataset& ds,
                                              const Eigen::VectorXd& eta1_probs,
                                              const FeatureMap& fm, const ElFitConfig& cfg = {}) {
  return fit_empirical_likelihood(TiltProblem(ds, eta1_probs, fm), cfg);
}

inline TiltFitResult fit_empirical_likelihood(const MnarDataset& ds, const LogisticModel& eta1,
                                              const FeatureMap& fm, const ElFitConfig& cfg = {}) {
  return fit_empirical_likelihood(ds, eta1.predict_proba_rows(ds.covariates), fm, cfg);
}

}  // namespace tiltbench
