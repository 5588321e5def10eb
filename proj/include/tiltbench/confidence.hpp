#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "tiltbench/dataset.hpp"
#include "tiltbench/estimators.hpp"
#include "tiltbench/logistic.hpp"
#include "tiltbench/tilt_fit.hpp"

namespace tiltbench {

struct ClassifierConfig {
  int poly_degree = 2;
  double ridge_lambda = 1e-3;
  int max_iter = 10000;
  double tolerance = 1e-8;

  FeatureMap feature_map(int d) const { return FeatureMap::polynomial(d, poly_degree); }
};

/// Per-row scores whose sample averages are the IW/DR estimators; pi_r is
/// always the evaluation split's n1/n.
inline double score_row(const MnarDataset& ds, int i, const TiltParams& th, const ProbFn& eta1,
                        const FeatureMap& fm, const MeanFunctional& tau, Estimand estimand,
                        Method method, double pir) {
  const Eigen::VectorXd x = ds.x(i);
  const int r = ds.missing_mask[i];
  const int y = ds.outcomes[i];
  const double ratio = (1.0 - pir) / pir;
  switch (method) {
    case Method::IW:
    case Method::IPW: {
      if (r == 0) return 0.0;
      const double omega = importance_weight(th, fm, x, y);
      if (estimand == Estimand::mu0) return omega * tau(x, y) / pir;
      return (1.0 + ratio * omega) * tau(x, y);
    }
    case Method::DR: {
      const double m = detail::m0_tau(th, eta1, fm, tau, x);
      if (estimand == Estimand::mu0) {
        if (r == 1) {
          const double omega = importance_weight(th, fm, x, y);
          return omega * (tau(x, y) - m) / pir;
        }
        return m / (1.0 - pir);
      }
      if (r == 1) {
        const double omega = importance_weight(th, fm, x, y);
        return (ratio + omega) * (tau(x, y) - m) + m;
      }
      return m;
    }
    case Method::OR:
      throw std::invalid_argument("score_row: no sample-split score for the OR method");
  }
  throw std::logic_error("score_row: unreachable");
}

/// Sample-split estimate with a normal-limit confidence interval: nuisances
/// (eta1, theta) are fitted on split A, scores averaged on split B;
/// std_error = sd(scores)/sqrt(n_B) and ci95 = point +- 1.96 se.
inline EstimateReport estimate_with_ci(const MnarDataset& ds, const FeatureMap& fm_tilt,
                                       const MeanFunctional& tau, Estimand estimand, Method method,
                                       double split_fraction, std::uint64_t seed,
                                       const ClassifierConfig& clf_cfg = {},
                                       const TiltFitConfig& tilt_cfg = {}) {
  auto [nuisance, eval] = split_dataset(ds, split_fraction, seed);
  for (const MnarDataset* part : {&nuisance, &eval}) {
    if (part->n_observed() < 2 || part->n_missing() < 1)
      throw std::runtime_error("estimate_with_ci: degenerate split (need both arms in both splits)");
  }

  const LogisticModel eta1_model =
      fit_eta1(nuisance, clf_cfg.feature_map(ds.d()), clf_cfg.ridge_lambda);
  const TiltFitResult fit = exponentiated_gradient(nuisance, eta1_model, fm_tilt, tilt_cfg);
  const ProbFn eta1 = prob_fn(eta1_model);

  const double pir = eval.pi_r();
  const int nb = eval.n();
  Eigen::ArrayXd scores(nb);
  for (int i = 0; i < nb; ++i)
    scores[i] = score_row(eval, i, fit.theta, eta1, fm_tilt, tau, estimand, method, pir);

  const double point = scores.mean();
  double var = 0.0;
  if (nb > 1) var = (scores - point).square().sum() / static_cast<double>(nb - 1);
  const double se = std::sqrt(var / static_cast<double>(nb));

  EstimateReport rep;
  rep.estimand = estimand;
  rep.method = method;
  rep.point = point;
  rep.std_error = se;
  rep.ci95 = std::make_pair(point - 1.96 * se, point + 1.96 * se);
  rep.n_used = nb;
  return rep;
}

}  // namespace tiltbench
