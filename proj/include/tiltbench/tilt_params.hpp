#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace tiltbench {

/// theta = (alpha0, alpha1, beta0, beta1) indexing the exponential tilt
/// omega(x, y; theta) = exp(alpha_y + beta_y . T(x)).
struct TiltParams {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  Eigen::VectorXd beta0;
  Eigen::VectorXd beta1;

  static TiltParams zeros(int p) {
    TiltParams t;
    t.beta0 = Eigen::VectorXd::Zero(p);
    t.beta1 = Eigen::VectorXd::Zero(p);
    return t;
  }

  int p() const { return static_cast<int>(beta0.size()); }

  double alpha(int y) const { return y ? alpha1 : alpha0; }
  const Eigen::VectorXd& beta(int y) const { return y ? beta1 : beta0; }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(2 + beta0.size() + beta1.size());
    v[0] = alpha0;
    v[1] = alpha1;
    v.segment(2, beta0.size()) = beta0;
    v.tail(beta1.size()) = beta1;
    return v;
  }

  static TiltParams unflatten(const Eigen::VectorXd& v, int p) {
    if (v.size() != 2 + 2 * p) throw std::invalid_argument("TiltParams: bad flat length");
    TiltParams t;
    t.alpha0 = v[0];
    t.alpha1 = v[1];
    t.beta0 = v.segment(2, p);
    t.beta1 = v.tail(p);
    return t;
  }

  bool all_finite() const {
    return std::isfinite(alpha0) && std::isfinite(alpha1) && beta0.allFinite() && beta1.allFinite();
  }

  double norm() const { return flatten().norm(); }
  double inf_distance(const TiltParams& o) const { return (flatten() - o.flatten()).lpNorm<Eigen::Infinity>(); }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"alpha0", alpha0},
        {"alpha1", alpha1},
        {"beta0", std::vector<double>(beta0.data(), beta0.data() + beta0.size())},
        {"beta1", std::vector<double>(beta1.data(), beta1.data() + beta1.size())}};
  }

  static TiltParams from_json(const nlohmann::json& j) {
    TiltParams t;
    t.alpha0 = j.at("alpha0").get<double>();
    t.alpha1 = j.at("alpha1").get<double>();
    auto b0 = j.at("beta0").get<std::vector<double>>();
    auto b1 = j.at("beta1").get<std::vector<double>>();
    t.beta0 = Eigen::Map<const Eigen::VectorXd>(b0.data(), static_cast<Eigen::Index>(b0.size()));
    t.beta1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<Eigen::Index>(b1.size()));
    return t;
  }
};

}  // namespace tiltbench
