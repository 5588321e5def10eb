#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "tiltbench/dataset.hpp"
#include "tiltbench/feature_map.hpp"
#include "tiltbench/optim.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

/// Ridge logistic regression over a feature map. With a degree-2 polynomial
/// map the fitted log-odds are quadratic in x, which realizes the documented
/// sufficient condition for tilt-parameter identifiability.
struct LogisticModel {
  FeatureMap feature_map = FeatureMap::identity(1);
  double intercept = 0.0;
  Eigen::VectorXd weights;
  double ridge_lambda = 0.0;

  double logit(const Eigen::VectorXd& x) const {
    return intercept + weights.dot(feature_map(x));
  }

  // sigma(b0 + w.T(x)), clamped to [1e-12, 1-1e-12]
  double predict_proba(const Eigen::VectorXd& x) const { return clamp_prob(sigmoid(logit(x))); }

  Eigen::VectorXd predict_proba_rows(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd F = feature_map.apply_rows(X);
    Eigen::ArrayXd z = (F * weights).array() + intercept;
    Eigen::VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = clamp_prob(sigmoid(z[i]));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["feature_map"] = feature_map.to_json();
    j["intercept"] = intercept;
    j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
    j["ridge_lambda"] = ridge_lambda;
    return j;
  }

  static LogisticModel from_json(const nlohmann::json& j) {
    LogisticModel m;
    m.feature_map = FeatureMap::from_json(j.at("feature_map"));
    m.intercept = j.at("intercept").get<double>();
    auto w = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.ridge_lambda = j.at("ridge_lambda").get<double>();
    return m;
  }
};

struct TrainingSpec {
  Eigen::VectorXd weights;      // empty -> all ones; must be >= 0, not all zero
  Eigen::VectorXd soft_labels;  // empty -> hard labels from the data
  double ridge_lambda = 0.0;
  int max_iter = 10000;
  double tolerance = 1e-8;
};

struct FitInfo {
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  double grad_inf_norm = 0.0;
};

namespace detail {

// Generic weighted soft-label cross-entropy with signed coefficients:
//   L(b0, w) = sum_j c_j * ( -p_j z_j + log(1+exp(z_j)) ) + ridge * |w|^2,
// z_j = b0 + w.f_j. The intercept is never penalized. Signed c_j is what the
// doubly robust trainer needs; ordinary fits use c_j = w_j / sum(w).
struct LogisticTerms {
  Eigen::MatrixXd features;  // m x p
  Eigen::VectorXd targets;   // p_j in [0,1]
  Eigen::VectorXd coeffs;    // signed
};

inline double logistic_value_grad(const LogisticTerms& terms, double ridge,
                                  const Eigen::VectorXd& params, Eigen::VectorXd& grad) {
  const Eigen::Index p = terms.features.cols();
  const double b0 = params[0];
  const auto w = params.tail(p);
  Eigen::ArrayXd z = (terms.features * w).array() + b0;

  double loss = 0.0;
  Eigen::ArrayXd dz(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double c = terms.coeffs[j];
    loss += c * (-terms.targets[j] * z[j] + log1pexp(z[j]));
    dz[j] = c * (sigmoid(z[j]) - terms.targets[j]);
  }
  loss += ridge * w.squaredNorm();
  grad.resize(p + 1);
  grad[0] = dz.sum();
  grad.tail(p) = terms.features.transpose() * dz.matrix() + 2.0 * ridge * w;
  return loss;
}

inline std::pair<Eigen::VectorXd, FitInfo> minimize_logistic(const LogisticTerms& terms,
                                                             double ridge, int max_iter,
                                                             double tol) {
  GdOptions opts;
  opts.max_iter = max_iter;
  opts.tol = tol;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(terms.features.cols() + 1);
  GdResult r;
  try {
    r = minimize_gd(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
          return logistic_value_grad(terms, ridge, x, g);
        },
        std::move(x0), opts);
  } catch (const std::runtime_error&) {
    throw std::runtime_error(
        "logistic fit: non-finite loss; data may be separable, use ridge_lambda > 0");
  }
  FitInfo info{r.converged, r.iterations, r.value, r.grad_inf_norm};
  return {r.x, info};
}

}  // namespace detail

/// Loss and gradient of the normalized weighted objective at the given
/// parameters; exposed so the gradient can be checked against finite
/// differences.
inline std::pair<double, Eigen::VectorXd> loss_and_gradient(
    double intercept, const Eigen::VectorXd& weights, const Eigen::MatrixXd& X,
    const Eigen::VectorXd& labels, const FeatureMap& fm, const TrainingSpec& spec) {
  const Eigen::Index n = X.rows();
  if (n == 0) throw std::invalid_argument("loss_and_gradient: empty data");
  detail::LogisticTerms terms;
  terms.features = fm.apply_rows(X);
  terms.targets = spec.soft_labels.size() ? spec.soft_labels : labels;
  Eigen::VectorXd w = spec.weights.size() ? spec.weights : Eigen::VectorXd::Ones(n);
  terms.coeffs = w / w.sum();
  Eigen::VectorXd params(weights.size() + 1);
  params[0] = intercept;
  params.tail(weights.size()) = weights;
  Eigen::VectorXd grad;
  double loss = detail::logistic_value_grad(terms, spec.ridge_lambda, params, grad);
  return {loss, grad};
}

/// Minimizes (1/sum w_i) sum_i w_i l(x_i, p_i; beta) + lambda |beta_1|^2 by
/// gradient descent with backtracking, from zero initial parameters.
inline LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& labels,
                                  const FeatureMap& fm, const TrainingSpec& spec,
                                  FitInfo* info_out = nullptr) {
  const Eigen::Index n = X.rows();
  if (n == 0) throw std::invalid_argument("fit_logistic: empty data");
  if (!X.allFinite()) throw std::invalid_argument("fit_logistic: non-finite covariate");

  detail::LogisticTerms terms;
  terms.features = fm.apply_rows(X);
  terms.targets = spec.soft_labels.size() ? spec.soft_labels : labels;
  if (terms.targets.size() != n) throw std::invalid_argument("fit_logistic: label length mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(terms.targets[i] >= 0.0 && terms.targets[i] <= 1.0))
      throw std::invalid_argument("fit_logistic: label outside [0,1]");
  }
  Eigen::VectorXd w = spec.weights.size() ? spec.weights : Eigen::VectorXd::Ones(n);
  if (w.size() != n) throw std::invalid_argument("fit_logistic: weight length mismatch");
  if (!w.allFinite() || (w.array() < 0.0).any())
    throw std::invalid_argument("fit_logistic: weights must be finite and nonnegative");
  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw std::invalid_argument("fit_logistic: weights sum to zero");
  terms.coeffs = w / wsum;

  auto [params, info] = detail::minimize_logistic(terms, spec.ridge_lambda, spec.max_iter, spec.tolerance);
  if (info_out) *info_out = info;

  LogisticModel model;
  model.feature_map = fm;
  model.intercept = params[0];
  model.weights = params.tail(params.size() - 1);
  model.ridge_lambda = spec.ridge_lambda;
  if (!std::isfinite(model.intercept) || !model.weights.allFinite())
    throw std::runtime_error("fit_logistic: non-finite parameters");
  return model;
}

/// eta1 classifier: P(Y=1 | X=x, R=1), fitted on the observed arm with hard
/// labels and uniform weights.
inline LogisticModel fit_eta1(const MnarDataset& ds, const FeatureMap& fm, double ridge_lambda,
                              FitInfo* info_out = nullptr) {
  const int n1 = ds.n_observed();
  if (n1 < 2) throw std::invalid_argument("fit_eta1: need at least two observed rows");
  Eigen::MatrixXd X(n1, ds.d());
  Eigen::VectorXd y(n1);
  int k = 0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.missing_mask[i] == 1) {
      X.row(k) = ds.covariates.row(i);
      y[k] = ds.outcomes[i];
      ++k;
    }
  }
  if ((y.array() == 0.0).all() || (y.array() == 1.0).all())
    throw std::runtime_error("fit_eta1: degenerate classifier (single-class observed arm)");
  TrainingSpec spec;
  spec.ridge_lambda = ridge_lambda;
  return fit_logistic(X, y, fm, spec, info_out);
}

}  // namespace tiltbench
