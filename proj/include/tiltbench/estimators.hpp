#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "tiltbench/dataset.hpp"
#include "tiltbench/feature_map.hpp"
#include "tiltbench/logistic.hpp"
#include "tiltbench/tilt_objective.hpp"
#include "tiltbench/tilt_params.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

using ProbFn = std::function<double(const Eigen::VectorXd&)>;

inline ProbFn prob_fn(const LogisticModel& model) {
  return [model](const Eigen::VectorXd& x) { return model.predict_proba(x); };
}

/// tau(x, y) supplied as the pair x -> tau(x,0), x -> tau(x,1); y is binary
/// so two branches keep the functional exact.
struct MeanFunctional {
  std::function<double(const Eigen::VectorXd&)> tau0;
  std::function<double(const Eigen::VectorXd&)> tau1;
  std::string name;

  double operator()(const Eigen::VectorXd& x, int y) const { return y ? tau1(x) : tau0(x); }

  static MeanFunctional outcome() {
    return {[](const Eigen::VectorXd&) { return 0.0; },
            [](const Eigen::VectorXd&) { return 1.0; }, "y"};
  }
  static MeanFunctional constant_one() {
    return {[](const Eigen::VectorXd&) { return 1.0; },
            [](const Eigen::VectorXd&) { return 1.0; }, "one"};
  }
};

enum class Estimand { mu, mu0 };
enum class Method { IW, IPW, DR, OR };

inline std::string to_string(Estimand e) { return e == Estimand::mu ? "mu" : "mu0"; }
inline std::string to_string(Method m) {
  switch (m) {
    case Method::IW: return "IW";
    case Method::IPW: return "IPW";
    case Method::DR: return "DR";
    case Method::OR: return "OR";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "iw" || s == "IW") return Method::IW;
  if (s == "ipw" || s == "IPW") return Method::IPW;
  if (s == "dr" || s == "DR") return Method::DR;
  if (s == "or" || s == "OR") return Method::OR;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct EstimateReport {
  Estimand estimand;
  Method method;
  double point = 0.0;
  std::optional<double> std_error;
  std::optional<std::pair<double, double>> ci95;
  int n_used = 0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"estimand", to_string(estimand)},
                     {"method", to_string(method)},
                     {"point", point},
                     {"n_used", n_used}};
    if (std_error) j["std_error"] = *std_error;
    if (ci95) j["ci95"] = {ci95->first, ci95->second};
    return j;
  }
};

/// omega(x, y; theta) = exp(alpha_y + beta_y . T(x)), exponent capped at +-700.
inline double importance_weight(const TiltParams& th, const FeatureMap& fm,
                                const Eigen::VectorXd& x, int y) {
  double a = th.alpha(y) + th.beta(y).dot(fm(x));
  a = std::max(-kExpCap, std::min(kExpCap, a));
  return std::exp(a);
}

inline double propensity_from_omega(double omega, double pi_r) {
  return pi_r / (pi_r + omega * (1.0 - pi_r));
}

/// Non-missingness propensity P(R=1 | X=x, Y=y) under the tilt model.
inline double propensity_r(const TiltParams& th, const FeatureMap& fm, const PiR& pi,
                           const Eigen::VectorXd& x, int y) {
  return propensity_from_omega(importance_weight(th, fm, x, y), pi.value);
}

/// gamma(1 | x) = (alpha1 - alpha0) + (beta1 - beta0) . T(x).
inline double gamma_log_odds(const TiltParams& th, const FeatureMap& fm,
                             const Eigen::VectorXd& x) {
  return (th.alpha1 - th.alpha0) + (th.beta1 - th.beta0).dot(fm(x));
}

/// m0(x) = E[Y | X=x, R=0] = sigma(gamma(1|x) + logit(eta1(x))); stable for
/// large |gamma|.
inline double outcome_regression_m0(const TiltParams& th, const ProbFn& eta1,
                                    const FeatureMap& fm, const Eigen::VectorXd& x) {
  const double eta = clamp_prob(eta1(x));
  const double logit_eta = std::log(eta) - std::log1p(-eta);
  return sigmoid(gamma_log_odds(th, fm, x) + logit_eta);
}

namespace detail {

// m_{0,tau}(x) = tau(x,0) + m0(x) (tau(x,1) - tau(x,0))
inline double m0_tau(const TiltParams& th, const ProbFn& eta1, const FeatureMap& fm,
                     const MeanFunctional& tau, const Eigen::VectorXd& x) {
  const double m0 = outcome_regression_m0(th, eta1, fm, x);
  const double t0 = tau.tau0(x);
  return t0 + m0 * (tau.tau1(x) - t0);
}

inline void require_observed(const MnarDataset& ds) {
  if (ds.n_observed() < 1) throw std::invalid_argument("estimator: no observed rows (n1 = 0)");
}
inline void require_missing(const MnarDataset& ds) {
  if (ds.n_missing() < 1) throw std::invalid_argument("estimator: no missing-outcome rows (n0 = 0)");
}

}  // namespace detail

/// mu0_IW = (1/n1) sum R_i omega_i tau_i.
inline EstimateReport estimate_mu0_iw(const MnarDataset& ds, const TiltParams& th,
                                      const FeatureMap& fm, const MeanFunctional& tau) {
  detail::require_observed(ds);
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.missing_mask[i] != 1) continue;
    const Eigen::VectorXd x = ds.x(i);
    acc += importance_weight(th, fm, x, ds.outcomes[i]) * tau(x, ds.outcomes[i]);
  }
  return {Estimand::mu0, Method::IW, acc / ds.n_observed(), std::nullopt, std::nullopt, ds.n()};
}

/// mu_IW = (1/n) sum R_i {1 + ((1-pi)/pi) omega_i} tau_i with pi = n1/n.
inline EstimateReport estimate_mu_iw(const MnarDataset& ds, const TiltParams& th,
                                     const FeatureMap& fm, const MeanFunctional& tau) {
  detail::require_observed(ds);
  const double pir = ds.pi_r();
  const double ratio = (1.0 - pir) / pir;
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.missing_mask[i] != 1) continue;
    const Eigen::VectorXd x = ds.x(i);
    acc += (1.0 + ratio * importance_weight(th, fm, x, ds.outcomes[i])) * tau(x, ds.outcomes[i]);
  }
  return {Estimand::mu, Method::IW, acc / ds.n(), std::nullopt, std::nullopt, ds.n()};
}

/// mu_IPW = (1/n) sum R_i tau_i / eta_r(X_i, Y_i); identical to mu_IW.
inline EstimateReport estimate_mu_ipw(const MnarDataset& ds, const TiltParams& th,
                                      const FeatureMap& fm, const MeanFunctional& tau) {
  detail::require_observed(ds);
  const double pir = ds.pi_r();
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.missing_mask[i] != 1) continue;
    const Eigen::VectorXd x = ds.x(i);
    const double omega = importance_weight(th, fm, x, ds.outcomes[i]);
    acc += tau(x, ds.outcomes[i]) / propensity_from_omega(omega, pir);
  }
  return {Estimand::mu, Method::IPW, acc / ds.n(), std::nullopt, std::nullopt, ds.n()};
}

/// mu0_DR = (1/n1) sum R_i omega_i (tau_i - m0tau_i) + (1/n0) sum (1-R_i) m0tau_i.
inline EstimateReport estimate_mu0_dr(const MnarDataset& ds, const TiltParams& th,
                                      const ProbFn& eta1, const FeatureMap& fm,
                                      const MeanFunctional& tau) {
  detail::require_observed(ds);
  detail::require_missing(ds);
  double acc_obs = 0.0, acc_mis = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    const Eigen::VectorXd x = ds.x(i);
    const double m = detail::m0_tau(th, eta1, fm, tau, x);
    if (ds.missing_mask[i] == 1) {
      acc_obs += importance_weight(th, fm, x, ds.outcomes[i]) * (tau(x, ds.outcomes[i]) - m);
    } else {
      acc_mis += m;
    }
  }
  const double point = acc_obs / ds.n_observed() + acc_mis / ds.n_missing();
  return {Estimand::mu0, Method::DR, point, std::nullopt, std::nullopt, ds.n()};
}

/// mu_DR = (1/n) sum R_i {(1-pi)/pi + omega_i}(tau_i - m0tau_i) + (1/n) sum m0tau_i.
inline EstimateReport estimate_mu_dr(const MnarDataset& ds, const TiltParams& th,
                                     const ProbFn& eta1, const FeatureMap& fm,
                                     const MeanFunctional& tau) {
  detail::require_observed(ds);
  const double pir = ds.pi_r();
  const double ratio = (1.0 - pir) / pir;
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    const Eigen::VectorXd x = ds.x(i);
    const double m = detail::m0_tau(th, eta1, fm, tau, x);
    acc += m;
    if (ds.missing_mask[i] == 1) {
      const double omega = importance_weight(th, fm, x, ds.outcomes[i]);
      acc += (ratio + omega) * (tau(x, ds.outcomes[i]) - m);
    }
  }
  return {Estimand::mu, Method::DR, acc / ds.n(), std::nullopt, std::nullopt, ds.n()};
}

/// Regression-only estimates; the values the DR forms collapse to when the
/// augmentation term vanishes.
inline EstimateReport estimate_mu0_or(const MnarDataset& ds, const TiltParams& th,
                                      const ProbFn& eta1, const FeatureMap& fm,
                                      const MeanFunctional& tau) {
  detail::require_missing(ds);
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.missing_mask[i] == 0) acc += detail::m0_tau(th, eta1, fm, tau, ds.x(i));
  }
  return {Estimand::mu0, Method::OR, acc / ds.n_missing(), std::nullopt, std::nullopt, ds.n()};
}

inline EstimateReport estimate_mu_or(const MnarDataset& ds, const TiltParams& th,
                                     const ProbFn& eta1, const FeatureMap& fm,
                                     const MeanFunctional& tau) {
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i) acc += detail::m0_tau(th, eta1, fm, tau, ds.x(i));
  return {Estimand::mu, Method::OR, acc / ds.n(), std::nullopt, std::nullopt, ds.n()};
}

inline EstimateReport estimate(const MnarDataset& ds, const TiltParams& th, const ProbFn& eta1,
                               const FeatureMap& fm, const MeanFunctional& tau, Estimand estimand,
                               Method method) {
  if (estimand == Estimand::mu) {
    switch (method) {
      case Method::IW: return estimate_mu_iw(ds, th, fm, tau);
      case Method::IPW: return estimate_mu_ipw(ds, th, fm, tau);
      case Method::DR: return estimate_mu_dr(ds, th, eta1, fm, tau);
      case Method::OR: return estimate_mu_or(ds, th, eta1, fm, tau);
    }
  } else {
    switch (method) {
      case Method::IW:
      case Method::IPW: {
        EstimateReport r = estimate_mu0_iw(ds, th, fm, tau);
        r.method = method;  // identical by the propensity identity
        return r;
      }
      case Method::DR: return estimate_mu0_dr(ds, th, eta1, fm, tau);
      case Method::OR: return estimate_mu0_or(ds, th, eta1, fm, tau);
    }
  }
  throw std::logic_error("estimate: unreachable");
}

/// General functional Psi(x, y, r) supplied as four closures indexed by
/// (y, r). Uses E[Psi] = E[Psi(X,Y,1)] + P(R=0) E[Psi(X,Y,0) - Psi(X,Y,1) | R=0].
struct GeneralFunctional {
  // psi[y][r]
  std::function<double(const Eigen::VectorXd&)> psi00, psi01, psi10, psi11;
  double operator()(const Eigen::VectorXd& x, int y, int r) const {
    if (y == 0) return r == 0 ? psi00(x) : psi01(x);
    return r == 0 ? psi10(x) : psi11(x);
  }
};

inline EstimateReport estimate_general(const MnarDataset& ds, const TiltParams& th,
                                       const ProbFn& eta1, const FeatureMap& fm,
                                       const GeneralFunctional& psi, Method method) {
  MeanFunctional tau_r1{[&psi](const Eigen::VectorXd& x) { return psi(x, 0, 1); },
                        [&psi](const Eigen::VectorXd& x) { return psi(x, 1, 1); }, "psi(.,.,1)"};
  MeanFunctional delta{[&psi](const Eigen::VectorXd& x) { return psi(x, 0, 0) - psi(x, 0, 1); },
                       [&psi](const Eigen::VectorXd& x) { return psi(x, 1, 0) - psi(x, 1, 1); },
                       "delta-psi"};
  const EstimateReport first = estimate(ds, th, eta1, fm, tau_r1, Estimand::mu, method);
  const EstimateReport second = estimate(ds, th, eta1, fm, delta, Estimand::mu0, method);
  const double pir = ds.pi_r();
  EstimateReport out;
  out.estimand = Estimand::mu;
  out.method = method;
  out.point = first.point + (1.0 - pir) * second.point;
  out.n_used = ds.n();
  return out;
}

/// Extreme-weight diagnostics: reported, never acted on.
struct WeightDiagnostics {
  double max_omega = 0.0;
  double effective_sample_size = 0.0;  // (sum w)^2 / sum w^2 over observed rows
};

inline WeightDiagnostics weight_diagnostics(const MnarDataset& ds, const TiltParams& th,
                                            const FeatureMap& fm) {
  WeightDiagnostics diag;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.missing_mask[i] != 1) continue;
    const double w = importance_weight(th, fm, ds.x(i), ds.outcomes[i]);
    diag.max_omega = std::max(diag.max_omega, w);
    sum += w;
    sumsq += w * w;
  }
  diag.effective_sample_size = sumsq > 0.0 ? sum * sum / sumsq : 0.0;
  return diag;
}

}  // namespace tiltbench
