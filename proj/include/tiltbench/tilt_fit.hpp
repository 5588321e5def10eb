#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tiltbench/logistic.hpp"
#include "tiltbench/tilt_objective.hpp"
#include "tiltbench/tilt_params.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

struct TiltFitConfig {
  double eps = 1e-3;   // constraint relaxation
  double tol = 2e-3;   // convergence threshold
  double B = 5.0;      // Lagrange multiplier bound
  double lr = 4e-3;    // primal step rho_1
  std::optional<double> dual_lr;  // rho_2; defaults to lr
  int max_iter = 4000;
  double reg = 1e-5;   // ridge on theta; 0 recovers the unregularized update
  std::optional<TiltParams> theta_init;  // defaults to zeros
  bool record_trace = false;

  double rho2() const { return dual_lr.value_or(lr); }
};

/// Multiplier parameters u1, u2; lambda_j = B exp(u_j) / (exp(u1) + exp(u2))
/// computed with max subtraction, so lambda1 - lambda2 stays in [-B, B].
struct DualState {
  double u1 = 0.0;
  double u2 = 0.0;

  std::pair<double, double> lambdas(double B) const {
    const double m = std::max(u1, u2);
    const double e1 = std::exp(u1 - m);
    const double e2 = std::exp(u2 - m);
    const double denom = e1 + e2;
    return {B * e1 / denom, B * e2 / denom};
  }
};

struct TiltTraceRow {
  int iter;
  double f;
  double g;
  double lambda_diff;
};

struct TiltFitResult {
  TiltParams theta;
  bool converged = false;
  int iterations = 0;
  double final_objective = 0.0;   // f_n for the exponentiated-gradient fit,
                                  // profile log-likelihood for the EL fit
  double final_constraint = 0.0;  // g_n at theta
  bool exponent_capped = false;
  std::vector<TiltTraceRow> trace;
  Eigen::VectorXd el_weights;  // implied p_i; only set by the EL fit

  nlohmann::json to_json() const {
    return nlohmann::json{{"theta", theta.to_json()},
                          {"converged", converged},
                          {"iterations", iterations},
                          {"final_objective", final_objective},
                          {"final_constraint", final_constraint}};
  }

  void write_trace_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "iter,f_n,g_n,lambda_diff\n";
    for (const auto& row : trace)
      out << row.iter << "," << fmt17(row.f) << "," << fmt17(row.g) << ","
          << fmt17(row.lambda_diff) << "\n";
  }
};

/// Exponentiated-gradient solver for the constrained KL-matching problem.
/// Per iteration: multipliers from the dual softmax, one primal step on the
/// Lagrangian (with optional ridge shrink), then the one-sided dual updates
/// driven by log(g_n + 1). Stops when
///   |theta' - theta| / |theta| + max(|g_n(theta)| - eps, 0) <= tol,
/// returning the iterate at which that held, so |g_n(theta_hat)| <= eps + tol
/// on every converged fit. Deterministic: no randomness anywhere.
inline TiltFitResult exponentiated_gradient(const TiltProblem& problem, const TiltFitConfig& cfg) {
  TiltParams theta = cfg.theta_init.value_or(TiltParams::zeros(problem.p()));
  if (theta.p() != problem.p()) throw std::invalid_argument("exponentiated_gradient: theta_init dim mismatch");
  DualState dual;
  const double rho1 = cfg.lr;
  const double rho2 = cfg.rho2();

  TiltFitResult res;
  res.theta = theta;
  bool any_capped = false;

  for (int t = 0; t < cfg.max_iter; ++t) {
    auto [lambda1, lambda2] = dual.lambdas(cfg.B);
    const double lambda_diff = lambda1 - lambda2;

    const double f = problem.objective(theta);
    bool capped = false;
    const double g = problem.constraint(theta, &capped);
    any_capped = any_capped || capped;
    if (!std::isfinite(f) || !std::isfinite(g))
      throw std::runtime_error("exponentiated_gradient: non-finite objective at iteration " +
                               std::to_string(t));
    if (cfg.record_trace) res.trace.push_back({t, f, g, lambda_diff});

    auto [grad_f, grad_g] = problem.gradients(theta);
    TiltParams next;
    const double shrink = 1.0 - rho1 * cfg.reg;
    next.alpha0 = shrink * theta.alpha0 - rho1 * (grad_f.alpha0 + lambda_diff * grad_g.alpha0);
    next.alpha1 = shrink * theta.alpha1 - rho1 * (grad_f.alpha1 + lambda_diff * grad_g.alpha1);
    next.beta0 = shrink * theta.beta0 - rho1 * (grad_f.beta0 + lambda_diff * grad_g.beta0);
    next.beta1 = shrink * theta.beta1 - rho1 * (grad_f.beta1 + lambda_diff * grad_g.beta1);
    if (!next.all_finite())
      throw std::runtime_error("exponentiated_gradient: non-finite theta at iteration " +
                               std::to_string(t));

    if (g + 1.0 <= 0.0)
      throw std::runtime_error("exponentiated_gradient: g_n <= -1 (mass underflow) at iteration " +
                               std::to_string(t));
    const double dual_step = rho2 * std::log1p(g);
    if (g > cfg.eps) dual.u1 += dual_step;
    if (g < -cfg.eps) dual.u2 -= dual_step;

    const double theta_norm = theta.norm();
    const double move = (next.flatten() - theta.flatten()).norm();
    const double ratio = theta_norm > 0.0 ? move / theta_norm : move;
    const double conv = ratio + std::max(std::abs(g) - cfg.eps, 0.0);
    if (conv <= cfg.tol) {
      res.theta = theta;  // iterate at which the criterion held
      res.converged = true;
      res.iterations = t + 1;
      res.final_objective = f;
      res.final_constraint = g;
      res.exponent_capped = any_capped;
      return res;
    }
    theta = next;
  }

  res.theta = theta;
  res.converged = false;
  res.iterations = cfg.max_iter;
  res.final_objective = problem.objective(theta);
  bool capped = false;
  res.final_constraint = problem.constraint(theta, &capped);
  res.exponent_capped = any_capped || capped;
  return res;
}

inline TiltFitResult exponentiated_gradient(const MnarDataset& ds, const Eigen::VectorXd& eta1_probs,
                                            const FeatureMap& fm, const TiltFitConfig& cfg = {}) {
  return exponentiated_gradient(TiltProblem(ds, eta1_probs, fm), cfg);
}

inline TiltFitResult exponentiated_gradient(const MnarDataset& ds, const LogisticModel& eta1,
                                            const FeatureMap& fm, const TiltFitConfig& cfg = {}) {
  return exponentiated_gradient(ds, eta1.predict_proba_rows(ds.covariates), fm, cfg);
}

}  // namespace tiltbench
