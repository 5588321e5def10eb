#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "tiltbench/rng.hpp"
#include "tiltbench/synthetic.hpp"
#include "tiltbench/tilt_params.hpp"

namespace tiltbench {

/// Two distinct tilt parameter values that generate the same missing-arm
/// marginal from the same observed-arm mixture. theta_a matches each observed
/// component to the missing component with the same label; theta_b swaps the
/// roles of the two missing-arm components. Both reproduce
/// p(x | R = 0) exactly, so the marginal alone cannot identify theta.
struct NonidentDemo {
  TiltParams theta_a;
  TiltParams theta_b;
  double max_density_gap = 0.0;  // sup over the random grid of |mix_a - mix_b|
  double tilted_mass_a = 0.0;    // integral of each tilted mixture (should be 1)
  double tilted_mass_b = 0.0;
};

namespace detail {

// alpha, beta with exp(alpha + beta.x) phi(x; mu_src) pi_src = pi_dst phi(x; mu_dst)
inline void match_component(double pi_src, const Eigen::Vector2d& mu_src, double pi_dst,
                            const Eigen::Vector2d& mu_dst, double& alpha, Eigen::Vector2d& beta) {
  beta = mu_dst - mu_src;
  alpha = std::log(pi_dst / pi_src) + (mu_src.squaredNorm() - mu_dst.squaredNorm()) / 2.0;
}

}  // namespace detail

inline double tilted_mixture_density(const TiltParams& theta, const SimDesign& design,
                                     const Eigen::Vector2d& x) {
  double acc = 0.0;
  for (int y = 0; y < 2; ++y) {
    const double prior = y == 1 ? design.pi_1_given_1 : 1.0 - design.pi_1_given_1;
    const double log_comp = theta.alpha(y) + theta.beta(y).dot(x) + std::log(prior) +
                            detail::log_gaussian2(x, design.mean(1, y), design.sigma(1, y));
    acc += std::exp(log_comp);
  }
  return acc;
}

inline NonidentDemo demo_nonidentifiable(std::uint64_t seed = 13, int grid_points = 1000) {
  // unit-variance instance of the mixture design
  const SimDesign design = SimDesign::well(1.0, 1, 0);
  const double p1_src = design.pi_1_given_1, p0_src = 1.0 - design.pi_1_given_1;
  const double p1_dst = design.pi_1_given_0, p0_dst = 1.0 - design.pi_1_given_0;

  NonidentDemo demo;
  demo.theta_a = TiltParams::zeros(2);
  demo.theta_b = TiltParams::zeros(2);

  Eigen::Vector2d beta;
  double alpha;
  // straight matching: observed y -> missing y
  detail::match_component(p1_src, design.mean(1, 1), p1_dst, design.mean(0, 1), alpha, beta);
  demo.theta_a.alpha1 = alpha;
  demo.theta_a.beta1 = beta;
  detail::match_component(p0_src, design.mean(1, 0), p0_dst, design.mean(0, 0), alpha, beta);
  demo.theta_a.alpha0 = alpha;
  demo.theta_a.beta0 = beta;
  // swapped matching: observed y=1 -> missing y=0 component and vice versa
  detail::match_component(p1_src, design.mean(1, 1), p0_dst, design.mean(0, 0), alpha, beta);
  demo.theta_b.alpha1 = alpha;
  demo.theta_b.beta1 = beta;
  detail::match_component(p0_src, design.mean(1, 0), p1_dst, design.mean(0, 1), alpha, beta);
  demo.theta_b.alpha0 = alpha;
  demo.theta_b.beta0 = beta;

  Rng rng(seed);
  for (int k = 0; k < grid_points; ++k) {
    const Eigen::Vector2d x(rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0));
    const double gap = std::abs(tilted_mixture_density(demo.theta_a, design, x) -
                                tilted_mixture_density(demo.theta_b, design, x));
    demo.max_density_gap = std::max(demo.max_density_gap, gap);
  }
  demo.tilted_mass_a = tilted_mass_quadrature(demo.theta_a, design);
  demo.tilted_mass_b = tilted_mass_quadrature(demo.theta_b, design);
  return demo;
}

}  // namespace tiltbench
