#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "tiltbench/dataset.hpp"
#include "tiltbench/feature_map.hpp"
#include "tiltbench/tilt_params.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

// exp arguments above this are capped (exp(700) ~ 1e304 still fits a double)
inline constexpr double kExpCap = 700.0;

/// Frozen view of (dataset, precomputed eta1 probabilities, feature map) with
/// everything the tilt objectives need cached: mapped features split by arm
/// and the log class probabilities. Read-only and shareable.
class TiltProblem {
 public:
  TiltProblem(const MnarDataset& ds, const Eigen::VectorXd& eta1_probs, const FeatureMap& fm) {
    if (eta1_probs.size() != ds.n())
      throw std::invalid_argument("TiltProblem: eta1_probs length mismatch");
    const Eigen::MatrixXd T = fm.apply_rows(ds.covariates);
    p_ = static_cast<int>(T.cols());
    n1_ = ds.n_observed();
    n0_ = ds.n_missing();
    n_ = ds.n();

    t_obs_.resize(n1_, p_);
    t_mis_.resize(n0_, p_);
    log_eta_obs_.resize(n1_);
    log_1m_eta_obs_.resize(n1_);
    log_eta_mis_.resize(n0_);
    log_1m_eta_mis_.resize(n0_);
    is_observed_.resize(n_);
    int k1 = 0, k0 = 0;
    for (int i = 0; i < n_; ++i) {
      const double eta = clamp_prob(eta1_probs[i]);
      is_observed_[i] = ds.missing_mask[i];
      if (ds.missing_mask[i] == 1) {
        t_obs_.row(k1) = T.row(i);
        log_eta_obs_[k1] = std::log(eta);
        log_1m_eta_obs_[k1] = std::log1p(-eta);
        ++k1;
      } else {
        t_mis_.row(k0) = T.row(i);
        log_eta_mis_[k0] = std::log(eta);
        log_1m_eta_mis_[k0] = std::log1p(-eta);
        ++k0;
      }
    }
  }

  int n() const { return n_; }
  int n_observed() const { return n1_; }
  int n_missing() const { return n0_; }
  int p() const { return p_; }

  /// f_n(theta): KL-matching objective over the missing arm, log-sum-exp form.
  double objective(const TiltParams& th) const {
    require_missing();
    Eigen::ArrayXd l1 = (t_mis_ * th.beta1).array() + th.alpha1 + log_eta_mis_;
    Eigen::ArrayXd l0 = (t_mis_ * th.beta0).array() + th.alpha0 + log_1m_eta_mis_;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < l1.size(); ++i) acc += logsumexp2(l1[i], l0[i]);
    return -acc / static_cast<double>(n0_);
  }

  /// g_n(theta): tilted-mass constraint over the observed arm, minus one.
  /// Exponent arguments are capped at 700; `capped` reports whether the cap
  /// was hit. Always > -1 in exact arithmetic.
  double constraint(const TiltParams& th, bool* capped = nullptr) const {
    require_observed();
    Eigen::ArrayXd l1 = (t_obs_ * th.beta1).array() + th.alpha1 + log_eta_obs_;
    Eigen::ArrayXd l0 = (t_obs_ * th.beta0).array() + th.alpha0 + log_1m_eta_obs_;
    if (capped) *capped = (l1 > kExpCap).any() || (l0 > kExpCap).any();
    double acc = (l1.min(kExpCap).exp() + l0.min(kExpCap).exp()).sum();
    return acc / static_cast<double>(n1_) - 1.0;
  }

  /// Analytic gradients of f_n and g_n with respect to
  /// (alpha0, alpha1, beta0, beta1).
  std::pair<TiltParams, TiltParams> gradients(const TiltParams& th) const {
    require_missing();
    require_observed();
    TiltParams gf = TiltParams::zeros(p_), gg = TiltParams::zeros(p_);

    {  // f: softmax responsibilities on the missing arm
      Eigen::ArrayXd l1 = (t_mis_ * th.beta1).array() + th.alpha1 + log_eta_mis_;
      Eigen::ArrayXd l0 = (t_mis_ * th.beta0).array() + th.alpha0 + log_1m_eta_mis_;
      Eigen::ArrayXd w1(l1.size());
      for (Eigen::Index i = 0; i < l1.size(); ++i) w1[i] = sigmoid(l1[i] - l0[i]);
      Eigen::ArrayXd w0 = 1.0 - w1;
      const double inv = 1.0 / static_cast<double>(n0_);
      gf.alpha1 = -w1.sum() * inv;
      gf.alpha0 = -w0.sum() * inv;
      gf.beta1 = -(t_mis_.transpose() * w1.matrix()) * inv;
      gf.beta0 = -(t_mis_.transpose() * w0.matrix()) * inv;
    }
    {  // g: tilted masses on the observed arm
      Eigen::ArrayXd l1 = (t_obs_ * th.beta1).array() + th.alpha1 + log_eta_obs_;
      Eigen::ArrayXd l0 = (t_obs_ * th.beta0).array() + th.alpha0 + log_1m_eta_obs_;
      Eigen::ArrayXd u1 = l1.min(kExpCap).exp();
      Eigen::ArrayXd u0 = l0.min(kExpCap).exp();
      const double inv = 1.0 / static_cast<double>(n1_);
      gg.alpha1 = u1.sum() * inv;
      gg.alpha0 = u0.sum() * inv;
      gg.beta1 = (t_obs_.transpose() * u1.matrix()) * inv;
      gg.beta0 = (t_obs_.transpose() * u0.matrix()) * inv;
    }
    return {gf, gg};
  }

  /// log kappa_i = log( eta_i e^{a1_i} + (1-eta_i) e^{a0_i} ) over all rows,
  /// in original row order; used by the profile likelihood.
  void log_kappa(const TiltParams& th, Eigen::ArrayXd& logk, Eigen::ArrayXd& l1_all,
                 Eigen::ArrayXd& l0_all) const {
    l1_all.resize(n_);
    l0_all.resize(n_);
    logk.resize(n_);
    Eigen::ArrayXd l1o = (t_obs_ * th.beta1).array() + th.alpha1 + log_eta_obs_;
    Eigen::ArrayXd l0o = (t_obs_ * th.beta0).array() + th.alpha0 + log_1m_eta_obs_;
    Eigen::ArrayXd l1m = (t_mis_ * th.beta1).array() + th.alpha1 + log_eta_mis_;
    Eigen::ArrayXd l0m = (t_mis_ * th.beta0).array() + th.alpha0 + log_1m_eta_mis_;
    int k1 = 0, k0 = 0;
    for (int i = 0; i < n_; ++i) {
      if (is_observed_[i]) {
        l1_all[i] = l1o[k1];
        l0_all[i] = l0o[k1];
        ++k1;
      } else {
        l1_all[i] = l1m[k0];
        l0_all[i] = l0m[k0];
        ++k0;
      }
      logk[i] = logsumexp2(l1_all[i], l0_all[i]);
    }
  }

  bool observed(int i) const { return is_observed_[i] == 1; }
  const Eigen::MatrixXd& features_observed() const { return t_obs_; }
  const Eigen::MatrixXd& features_missing() const { return t_mis_; }

 private:
  void require_missing() const {
    if (n0_ < 1) throw std::invalid_argument("tilt objective: no missing-outcome rows (n0 = 0)");
  }
  void require_observed() const {
    if (n1_ < 1) throw std::invalid_argument("tilt constraint: no observed rows (n1 = 0)");
  }

  Eigen::MatrixXd t_obs_, t_mis_;
  Eigen::ArrayXd log_eta_obs_, log_1m_eta_obs_, log_eta_mis_, log_1m_eta_mis_;
  Eigen::VectorXi is_observed_;
  int n_ = 0, n1_ = 0, n0_ = 0, p_ = 0;
};

inline double objective_fn(const TiltParams& th, const MnarDataset& ds,
                           const Eigen::VectorXd& eta1_probs, const FeatureMap& fm) {
  return TiltProblem(ds, eta1_probs, fm).objective(th);
}

inline double constraint_gn(const TiltParams& th, const MnarDataset& ds,
                            const Eigen::VectorXd& eta1_probs, const FeatureMap& fm) {
  return TiltProblem(ds, eta1_probs, fm).constraint(th);
}

inline std::pair<TiltParams, TiltParams> tilt_gradients(const TiltParams& th, const MnarDataset& ds,
                                                        const Eigen::VectorXd& eta1_probs,
                                                        const FeatureMap& fm) {
  return TiltProblem(ds, eta1_probs, fm).gradients(th);
}

}  // namespace tiltbench
