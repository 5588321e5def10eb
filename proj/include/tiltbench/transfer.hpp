#pragma once

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tiltbench/confidence.hpp"
#include "tiltbench/dataset.hpp"
#include "tiltbench/estimators.hpp"
#include "tiltbench/logistic.hpp"
#include "tiltbench/rng.hpp"
#include "tiltbench/tilt_fit.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

/// Subpopulation-shift design: class-conditional laws X | (Y, A) are shared
/// N(nu_{y,a}, I_d) across domains; only the (Y, A) proportions move. The
/// source correlates A with Y at 95%, the target is balanced, and the
/// A-axis separation (gap 4) beats the Y-axis separation (gap 2), so a
/// source-trained classifier leans on the spurious axis.
struct ShiftDesign {
  int dim = 10;
  double y_gap_half = 1.0;  // nu axis 1: +-1 by label
  double a_gap_half = 2.0;  // nu axis 2: +-2 by group
  double source_p_y1 = 0.5;
  double source_align = 0.95;  // P(A = y | Y = y, R = 1)
  int n_source = 2000;
  int n_target = 2000;
  std::uint64_t seed = 0;

  Eigen::VectorXd mean(int y, int a) const {
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(dim);
    nu[0] = (2 * y - 1) * y_gap_half;
    nu[1] = (2 * a - 1) * a_gap_half;
    return nu;
  }

  double source_prob(int y, int a) const {
    const double py = y == 1 ? source_p_y1 : 1.0 - source_p_y1;
    return py * (a == y ? source_align : 1.0 - source_align);
  }
  double target_prob(int, int) const { return 0.25; }
};

/// omega*(a, y) = P(Y=y, A=a | R=0) / P(Y=y, A=a | R=1).
inline double true_importance_weight(const ShiftDesign& d, int a, int y) {
  return d.target_prob(y, a) / d.source_prob(y, a);
}

struct ShiftData {
  Eigen::MatrixXd source_x;
  Eigen::VectorXi source_y, source_a;
  Eigen::MatrixXd target_train_x;  // labels below exist for oracles/evaluation only
  Eigen::VectorXi target_train_y, target_train_a;
  Eigen::MatrixXd target_test_x;
  Eigen::VectorXi target_test_y, target_test_a;
};

/// Seeded draw of both domains; the target is split 75/25 into train/test.
/// Y and A of target rows are recorded for oracle training and evaluation
/// but must not reach the tilt fit or the non-oracle trainers.
inline ShiftData generate_shift(const ShiftDesign& design) {
  if (design.n_source < 1 || design.n_target < 4)
    throw std::invalid_argument("generate_shift: need n_source >= 1 and n_target >= 4");
  Rng rng(design.seed);

  auto draw_domain = [&](int n, bool source, Eigen::MatrixXd& X, Eigen::VectorXi& yv,
                         Eigen::VectorXi& av) {
    X.resize(n, design.dim);
    yv.resize(n);
    av.resize(n);
    for (int i = 0; i < n; ++i) {
      int y, a;
      if (source) {
        y = rng.bernoulli(design.source_p_y1) ? 1 : 0;
        a = rng.bernoulli(design.source_align) ? y : 1 - y;
      } else {
        y = rng.bernoulli(0.5) ? 1 : 0;
        a = rng.bernoulli(0.5) ? 1 : 0;
      }
      const Eigen::VectorXd nu = design.mean(y, a);
      for (int j = 0; j < design.dim; ++j) X(i, j) = nu[j] + rng.normal();
      yv[i] = y;
      av[i] = a;
    }
  };

  ShiftData data;
  draw_domain(design.n_source, true, data.source_x, data.source_y, data.source_a);

  Eigen::MatrixXd tx;
  Eigen::VectorXi ty, ta;
  draw_domain(design.n_target, false, tx, ty, ta);
  std::vector<int> idx(static_cast<std::size_t>(design.n_target));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  const int n_train = (design.n_target * 3) / 4;
  const int n_test = design.n_target - n_train;
  data.target_train_x.resize(n_train, design.dim);
  data.target_train_y.resize(n_train);
  data.target_train_a.resize(n_train);
  data.target_test_x.resize(n_test, design.dim);
  data.target_test_y.resize(n_test);
  data.target_test_a.resize(n_test);
  for (int k = 0; k < n_train; ++k) {
    data.target_train_x.row(k) = tx.row(idx[static_cast<std::size_t>(k)]);
    data.target_train_y[k] = ty[idx[static_cast<std::size_t>(k)]];
    data.target_train_a[k] = ta[idx[static_cast<std::size_t>(k)]];
  }
  for (int k = 0; k < n_test; ++k) {
    data.target_test_x.row(k) = tx.row(idx[static_cast<std::size_t>(n_train + k)]);
    data.target_test_y[k] = ty[idx[static_cast<std::size_t>(n_train + k)]];
    data.target_test_a[k] = ta[idx[static_cast<std::size_t>(n_train + k)]];
  }
  return data;
}

inline double accuracy(const LogisticModel& model, const Eigen::MatrixXd& X,
                       const Eigen::VectorXi& y) {
  const Eigen::VectorXd p = model.predict_proba_rows(X);
  int hits = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if ((p[i] >= 0.5 ? 1 : 0) == y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

enum class Trainer { source, target, reweight, iw, or_, dr };
inline std::string to_string(Trainer t) {
  switch (t) {
    case Trainer::source: return "source";
    case Trainer::target: return "target";
    case Trainer::reweight: return "reweight";
    case Trainer::iw: return "IW";
    case Trainer::or_: return "OR";
    case Trainer::dr: return "DR";
  }
  return "?";
}
inline constexpr std::array<Trainer, 6> kTrainers{Trainer::source, Trainer::target,
                                                  Trainer::reweight, Trainer::iw, Trainer::or_,
                                                  Trainer::dr};

struct TransferRepeat {
  std::array<double, 6> acc{};  // indexed by kTrainers order
  double acc_a_given_u = 0.0;
  double acc_a_given_x = 0.0;
  bool failed = false;
  std::string error;
};

struct TransferBenchResult {
  std::vector<TransferRepeat> repeats;

  std::pair<double, double> mean_sd(Trainer t) const {
    std::vector<double> v;
    for (const auto& r : repeats)
      if (!r.failed) v.push_back(r.acc[static_cast<std::size_t>(t)]);
    return mean_sd_of(v);
  }
  std::pair<double, double> mean_sd_mcv_u() const {
    std::vector<double> v;
    for (const auto& r : repeats)
      if (!r.failed) v.push_back(r.acc_a_given_u);
    return mean_sd_of(v);
  }
  std::pair<double, double> mean_sd_mcv_x() const {
    std::vector<double> v;
    for (const auto& r : repeats)
      if (!r.failed) v.push_back(r.acc_a_given_x);
    return mean_sd_of(v);
  }

  void write_accuracy_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "repeat,trainer,accuracy\n";
    for (std::size_t k = 0; k < repeats.size(); ++k) {
      if (repeats[k].failed) continue;
      for (Trainer t : kTrainers)
        out << k << "," << to_string(t) << ","
            << fmt17(repeats[k].acc[static_cast<std::size_t>(t)]) << "\n";
    }
  }

  void write_mcv_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "repeat,model,mcv_accuracy\n";
    for (std::size_t k = 0; k < repeats.size(); ++k) {
      if (repeats[k].failed) continue;
      out << k << ",A~U," << fmt17(repeats[k].acc_a_given_u) << "\n";
      out << k << ",A~X," << fmt17(repeats[k].acc_a_given_x) << "\n";
    }
  }

  nlohmann::json summary_json() const {
    nlohmann::json j;
    for (Trainer t : kTrainers) {
      auto [m, s] = mean_sd(t);
      j["accuracy"][to_string(t)] = {{"mean", m}, {"sd", s}};
    }
    auto [mu_, su] = mean_sd_mcv_u();
    auto [mx, sx] = mean_sd_mcv_x();
    j["mcv"]["A~U"] = {{"mean", mu_}, {"sd", su}};
    j["mcv"]["A~X"] = {{"mean", mx}, {"sd", sx}};
    int failures = 0;
    for (const auto& r : repeats)
      if (r.failed) ++failures;
    j["failed_repeats"] = failures;
    return j;
  }

 private:
  static std::pair<double, double> mean_sd_of(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return {m, sd};
  }
};

/// Fits A ~ U_hat and A ~ X ridge logistic models on target-train and scores
/// them on target-test; U_hat = (beta0 . x, beta1 . x) is the fitted proxy
/// for the missingness controlling variable. The only consumer of target A
/// labels besides the oracle trainers.
inline std::pair<double, double> evaluate_mcv_surrogate(const TiltParams& theta,
                                                        const ShiftData& data, double lambda) {
  const auto& a_train = data.target_train_a;
  if ((a_train.array() == a_train[0]).all())
    throw std::runtime_error("evaluate_mcv_surrogate: degenerate A distribution");

  auto u_features = [&theta](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd U(X.rows(), 2);
    U.col(0) = X * theta.beta0;
    U.col(1) = X * theta.beta1;
    return U;
  };
  TrainingSpec spec;
  spec.ridge_lambda = lambda;

  const Eigen::MatrixXd u_train = u_features(data.target_train_x);
  const Eigen::MatrixXd u_test = u_features(data.target_test_x);
  const LogisticModel a_from_u =
      fit_logistic(u_train, a_train.cast<double>(), FeatureMap::identity(2), spec);
  const LogisticModel a_from_x = fit_logistic(data.target_train_x, a_train.cast<double>(),
                                              FeatureMap::identity(data.target_train_x.cols()), spec);
  return {accuracy(a_from_u, u_test, data.target_test_a),
          accuracy(a_from_x, data.target_test_x, data.target_test_a)};
}

/// One repeat of the six-trainer benchmark. A is masked from the tilt fit
/// and every non-oracle trainer by construction of the inputs passed on.
inline TransferRepeat run_transfer_repeat(const ShiftDesign& design, const TiltFitConfig& tilt_cfg,
                                          const ClassifierConfig& eta1_cfg, double lambda) {
  TransferRepeat rep;
  const ShiftData data = generate_shift(design);
  const int n1 = static_cast<int>(data.source_x.rows());
  const int n0 = static_cast<int>(data.target_train_x.rows());
  const int d = design.dim;

  // eta1 on the source, degree-2 features
  TrainingSpec eta1_spec;
  eta1_spec.ridge_lambda = eta1_cfg.ridge_lambda;
  eta1_spec.max_iter = eta1_cfg.max_iter;
  eta1_spec.tolerance = eta1_cfg.tolerance;
  const LogisticModel eta1_model = fit_logistic(
      data.source_x, data.source_y.cast<double>(), eta1_cfg.feature_map(d), eta1_spec);

  // tilt fit with T(x) = x on source (r=1) + target-train (r=0)
  Eigen::MatrixXd X(n1 + n0, d);
  X.topRows(n1) = data.source_x;
  X.bottomRows(n0) = data.target_train_x;
  Eigen::VectorXi y(n1 + n0), r(n1 + n0);
  y.head(n1) = data.source_y;
  y.tail(n0).setZero();
  r.head(n1).setOnes();
  r.tail(n0).setZero();
  const MnarDataset tilt_data = make_dataset(X, y, r);
  const FeatureMap identity = FeatureMap::identity(d);
  const TiltFitResult tilt = exponentiated_gradient(tilt_data, eta1_model, identity, tilt_cfg);
  const TiltParams& theta = tilt.theta;

  // per-row tilt weights on the source and m0 soft labels on target-train
  Eigen::VectorXd omega_hat(n1), omega_star(n1);
  for (int i = 0; i < n1; ++i) {
    omega_hat[i] = importance_weight(theta, identity, data.source_x.row(i), data.source_y[i]);
    omega_star[i] = true_importance_weight(design, data.source_a[i], data.source_y[i]);
  }
  const ProbFn eta1 = prob_fn(eta1_model);
  Eigen::VectorXd m0_train(n0), m0_source(n1);
  for (int i = 0; i < n0; ++i)
    m0_train[i] = outcome_regression_m0(theta, eta1, identity, data.target_train_x.row(i));
  for (int i = 0; i < n1; ++i)
    m0_source[i] = outcome_regression_m0(theta, eta1, identity, data.source_x.row(i));

  TrainingSpec spec;
  spec.ridge_lambda = lambda;
  auto fit_source = [&](const Eigen::VectorXd& weights) {
    TrainingSpec s = spec;
    s.weights = weights;
    return fit_logistic(data.source_x, data.source_y.cast<double>(), identity, s);
  };

  auto set = [&rep](Trainer t, double v) { rep.acc[static_cast<std::size_t>(t)] = v; };
  const Eigen::MatrixXd& test_x = data.target_test_x;
  const Eigen::VectorXi& test_y = data.target_test_y;

  set(Trainer::source, accuracy(fit_source(Eigen::VectorXd::Ones(n1)), test_x, test_y));
  {
    const LogisticModel target = fit_logistic(data.target_train_x,
                                              data.target_train_y.cast<double>(), identity, spec);
    set(Trainer::target, accuracy(target, test_x, test_y));
  }
  set(Trainer::reweight, accuracy(fit_source(omega_star), test_x, test_y));
  set(Trainer::iw, accuracy(fit_source(omega_hat), test_x, test_y));
  {
    TrainingSpec s = spec;
    s.soft_labels = m0_train;
    const LogisticModel or_model =
        fit_logistic(data.target_train_x, m0_train, identity, s);
    set(Trainer::or_, accuracy(or_model, test_x, test_y));
  }
  {
    // DR trainer, signed-coefficient objective:
    //   (1/n1) sum omega_i {l(x_i, y_i) - l(x_i, m0_i)} + (1/n0) sum l(x_j, m0_j) + lambda|b|^2.
    // Known to be unstable when omega (y - m0) aligns with a separable
    // direction; the fit stops at max_iter in that case and the accuracy is
    // reported as-is.
    detail::LogisticTerms terms;
    terms.features.resize(2 * n1 + n0, d);
    terms.targets.resize(2 * n1 + n0);
    terms.coeffs.resize(2 * n1 + n0);
    for (int i = 0; i < n1; ++i) {
      terms.features.row(2 * i) = data.source_x.row(i);
      terms.targets[2 * i] = data.source_y[i];
      terms.coeffs[2 * i] = omega_hat[i] / n1;
      terms.features.row(2 * i + 1) = data.source_x.row(i);
      terms.targets[2 * i + 1] = m0_source[i];
      terms.coeffs[2 * i + 1] = -omega_hat[i] / n1;
    }
    for (int j = 0; j < n0; ++j) {
      terms.features.row(2 * n1 + j) = data.target_train_x.row(j);
      terms.targets[2 * n1 + j] = m0_train[j];
      terms.coeffs[2 * n1 + j] = 1.0 / n0;
    }
    auto [params, info] = detail::minimize_logistic(terms, lambda, spec.max_iter, spec.tolerance);
    LogisticModel dr_model;
    dr_model.feature_map = identity;
    dr_model.intercept = params[0];
    dr_model.weights = params.tail(d);
    dr_model.ridge_lambda = lambda;
    set(Trainer::dr, accuracy(dr_model, test_x, test_y));
  }

  auto [acc_u, acc_x] = evaluate_mcv_surrogate(theta, data, lambda);
  rep.acc_a_given_u = acc_u;
  rep.acc_a_given_x = acc_x;
  return rep;
}

inline TransferBenchResult run_benchmark(const ShiftDesign& design, const TiltFitConfig& tilt_cfg,
                                         const ClassifierConfig& eta1_cfg, double lambda,
                                         int repeats, int threads = 0) {
  if (repeats < 1) throw std::invalid_argument("run_benchmark: repeats must be >= 1");
  TransferBenchResult result;
  result.repeats.resize(static_cast<std::size_t>(repeats));
  std::atomic<int> next{0};
  const int workers = std::min(resolve_threads(threads), repeats);
  auto work = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= repeats) return;
      ShiftDesign d = design;
      d.seed = mix_seed(design.seed, static_cast<std::uint64_t>(k));
      try {
        result.repeats[static_cast<std::size_t>(k)] = run_transfer_repeat(d, tilt_cfg, eta1_cfg, lambda);
      } catch (const std::exception& e) {
        result.repeats[static_cast<std::size_t>(k)].failed = true;
        result.repeats[static_cast<std::size_t>(k)].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return result;
}

}  // namespace tiltbench
