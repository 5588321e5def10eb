#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace tiltbench {

struct GdOptions {
  int max_iter = 10000;
  double tol = 1e-8;        // on gradient infinity norm
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double init_step = 1.0;
  double min_step = 1e-20;
};

struct GdResult {
  Eigen::VectorXd x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_inf_norm = 0.0;
};

/// Full-batch gradient descent with Armijo backtracking. The objective
/// callback writes the gradient into its second argument and returns the
/// value. Trial steps with non-finite value are rejected like any failed
/// Armijo test; a non-finite incumbent aborts.
inline GdResult minimize_gd(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fn,
                            Eigen::VectorXd x0, const GdOptions& opts = {}) {
  GdResult res;
  res.x = std::move(x0);
  Eigen::VectorXd grad(res.x.size()), trial_grad(res.x.size());
  double value = fn(res.x, grad);
  if (!std::isfinite(value)) throw std::runtime_error("minimize_gd: non-finite objective at start");

  double step = opts.init_step;
  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    res.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_inf_norm <= opts.tol) {
      res.converged = true;
      break;
    }
    const double sq = grad.squaredNorm();
    bool accepted = false;
    // warm-start the line search near the last accepted step
    step = std::min(step * 4.0, 1e6);
    while (step >= opts.min_step) {
      Eigen::VectorXd trial = res.x - step * grad;
      double trial_value = fn(trial, trial_grad);
      if (std::isfinite(trial_value) && trial_value <= value - opts.armijo_c * step * sq) {
        res.x.swap(trial);
        value = trial_value;
        grad.swap(trial_grad);
        accepted = true;
        break;
      }
      step *= opts.shrink;
    }
    if (!accepted) break;  // no admissible step left; gradient is the verdict
    res.iterations = it + 1;
  }
  if (!std::isfinite(value)) throw std::runtime_error("minimize_gd: non-finite objective");
  res.value = value;
  res.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
  if (res.grad_inf_norm <= opts.tol) res.converged = true;
  return res;
}

}  // namespace tiltbench
