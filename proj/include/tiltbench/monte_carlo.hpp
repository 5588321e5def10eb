#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tiltbench/confidence.hpp"
#include "tiltbench/empirical_likelihood.hpp"
#include "tiltbench/estimators.hpp"
#include "tiltbench/logistic.hpp"
#include "tiltbench/synthetic.hpp"
#include "tiltbench/tilt_fit.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

enum class TiltFitter { exp_grad, empirical_likelihood };

inline std::string to_string(DesignKind k) {
  return k == DesignKind::well_specified ? "well" : "miss";
}
inline std::string to_string(TiltFitter f) {
  return f == TiltFitter::exp_grad ? "expgrad" : "el";
}

struct MonteCarloConfig {
  std::vector<DesignKind> kinds{DesignKind::well_specified, DesignKind::misspecified};
  std::vector<double> sigma1_grid{0.75, 1.0, 1.25, 1.5};
  int reps = 50;
  int n = 400;
  int classifier_n = 200;
  std::uint64_t seed = 0;
  ClassifierConfig classifier;
  TiltFitConfig tilt;
  TiltFitter fitter = TiltFitter::exp_grad;
  int threads = 0;
};

struct McRow {
  DesignKind kind;
  double sigma1;
  int rep;
  Estimand estimand;
  Method method;
  double point;
  bool failed;
};

struct McSummaryRow {
  DesignKind kind;
  double sigma1;
  Estimand estimand;
  Method method;
  int count;
  double median_point;
  double iqr;
  double bias;
  double rmse;
};

struct McResult {
  std::vector<McRow> rows;

  void write_long_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "kind,sigma1,rep,estimand,method,point\n";
    for (const auto& r : rows)
      out << to_string(r.kind) << "," << fmt17(r.sigma1) << "," << r.rep << ","
          << to_string(r.estimand) << "," << to_string(r.method) << ","
          << (r.failed ? "nan" : fmt17(r.point)) << "\n";
  }
};

namespace detail {

// The per-rep stream depends on (seed, sigma1, rep) but NOT on the design
// kind, so the well-specified and misspecified runs at sigma1 = 1 see
// identical draws and produce bit-identical datasets.
inline std::uint64_t rep_seed(std::uint64_t master, double sigma1, int rep) {
  std::uint64_t bits;
  std::memcpy(&bits, &sigma1, sizeof(bits));
  return mix_seed(mix_seed(master, bits), static_cast<std::uint64_t>(rep));
}

}  // namespace detail

/// One replication of the simulation protocol: draw the estimation sample,
/// draw a separate observed-arm sample for the classifier, fit eta1 and the
/// tilt, then report IW and DR estimates of mu and mu0 for tau(x,y) = y.
inline std::vector<McRow> run_one_rep(DesignKind kind, double sigma1, int rep,
                                      const MonteCarloConfig& cfg) {
  const std::uint64_t rs = detail::rep_seed(cfg.seed, sigma1, rep);
  SimDesign design = kind == DesignKind::well_specified
                         ? SimDesign::well(sigma1, cfg.n, mix_seed(rs, 1))
                         : SimDesign::miss(sigma1, cfg.n, mix_seed(rs, 1));

  std::vector<McRow> rows;
  auto push = [&](Estimand e, Method m, double point, bool failed) {
    rows.push_back({kind, sigma1, rep, e, m, point, failed});
  };
  try {
    const MnarDataset data = generate(design);
    auto [Xc, yc] = sample_observed_arm(design, cfg.classifier_n, mix_seed(rs, 2));
    TrainingSpec spec;
    spec.ridge_lambda = cfg.classifier.ridge_lambda;
    spec.max_iter = cfg.classifier.max_iter;
    spec.tolerance = cfg.classifier.tolerance;
    const LogisticModel eta1_model =
        fit_logistic(Xc, yc, cfg.classifier.feature_map(2), spec);

    const FeatureMap identity = FeatureMap::identity(2);
    const TiltProblem problem(data, eta1_model.predict_proba_rows(data.covariates), identity);
    TiltParams theta;
    if (cfg.fitter == TiltFitter::exp_grad) {
      theta = exponentiated_gradient(problem, cfg.tilt).theta;
    } else {
      theta = fit_empirical_likelihood(problem).theta;
    }

    const MeanFunctional tau = MeanFunctional::outcome();
    const ProbFn eta1 = prob_fn(eta1_model);
    push(Estimand::mu0, Method::IW, estimate_mu0_iw(data, theta, identity, tau).point, false);
    push(Estimand::mu0, Method::DR, estimate_mu0_dr(data, theta, eta1, identity, tau).point, false);
    push(Estimand::mu, Method::IW, estimate_mu_iw(data, theta, identity, tau).point, false);
    push(Estimand::mu, Method::DR, estimate_mu_dr(data, theta, eta1, identity, tau).point, false);
  } catch (const std::exception&) {
    rows.clear();
    const double nan = std::nan("");
    push(Estimand::mu0, Method::IW, nan, true);
    push(Estimand::mu0, Method::DR, nan, true);
    push(Estimand::mu, Method::IW, nan, true);
    push(Estimand::mu, Method::DR, nan, true);
  }
  return rows;
}

inline McResult run_monte_carlo(const MonteCarloConfig& cfg) {
  if (cfg.reps < 1) throw std::invalid_argument("run_monte_carlo: reps must be >= 1");
  struct Task {
    DesignKind kind;
    double sigma1;
    int rep;
  };
  std::vector<Task> tasks;
  for (DesignKind kind : cfg.kinds)
    for (double s : cfg.sigma1_grid)
      for (int rep = 0; rep < cfg.reps; ++rep) tasks.push_back({kind, s, rep});

  std::vector<std::vector<McRow>> per_task(tasks.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::min<int>(resolve_threads(cfg.threads), static_cast<int>(tasks.size()));
  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      per_task[k] = run_one_rep(tasks[k].kind, tasks[k].sigma1, tasks[k].rep, cfg);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  McResult result;
  for (auto& rows : per_task)
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  return result;
}

inline std::vector<McSummaryRow> summarize(const McResult& result, const SimDesign& reference = {}) {
  std::vector<McSummaryRow> summary;
  for (DesignKind kind : {DesignKind::well_specified, DesignKind::misspecified}) {
    std::vector<double> sigmas;
    for (const auto& r : result.rows) {
      if (r.kind != kind) continue;
      if (std::find(sigmas.begin(), sigmas.end(), r.sigma1) == sigmas.end())
        sigmas.push_back(r.sigma1);
    }
    for (double s : sigmas) {
      for (Estimand e : {Estimand::mu0, Estimand::mu}) {
        for (Method m : {Method::IW, Method::DR}) {
          std::vector<double> pts;
          for (const auto& r : result.rows)
            if (r.kind == kind && r.sigma1 == s && r.estimand == e && r.method == m && !r.failed)
              pts.push_back(r.point);
          if (pts.empty()) continue;
          const double truth = e == Estimand::mu0 ? true_mu0(reference) : true_mu(reference);
          double mean = 0.0, msq = 0.0;
          for (double p : pts) {
            mean += p;
            msq += (p - truth) * (p - truth);
          }
          mean /= static_cast<double>(pts.size());
          McSummaryRow row;
          row.kind = kind;
          row.sigma1 = s;
          row.estimand = e;
          row.method = m;
          row.count = static_cast<int>(pts.size());
          row.median_point = median(pts);
          row.iqr = quantile(pts, 0.75) - quantile(pts, 0.25);
          row.bias = mean - truth;
          row.rmse = std::sqrt(msq / static_cast<double>(pts.size()));
          summary.push_back(row);
        }
      }
    }
  }
  return summary;
}

inline void write_summary_csv(const std::vector<McSummaryRow>& summary, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "kind,sigma1,estimand,method,count,median,iqr,bias,rmse\n";
  for (const auto& r : summary)
    out << to_string(r.kind) << "," << fmt17(r.sigma1) << "," << to_string(r.estimand) << ","
        << to_string(r.method) << "," << r.count << "," << fmt17(r.median_point) << ","
        << fmt17(r.iqr) << "," << fmt17(r.bias) << "," << fmt17(r.rmse) << "\n";
}

/// Same grid fitted twice, once per tilt fitter, with shared seeds; rows are
/// paired per cell for the side-by-side comparison.
struct ElCompareCell {
  DesignKind kind;
  double sigma1;
  Estimand estimand;
  Method method;
  double bias_expgrad, rmse_expgrad;
  double bias_el, rmse_el;
  int count_expgrad, count_el;
};

struct ElCompareResult {
  std::vector<ElCompareCell> cells;
  McResult expgrad_rows, el_rows;

  void write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "kind,sigma1,estimand,method,bias_expgrad,rmse_expgrad,bias_el,rmse_el\n";
    for (const auto& c : cells)
      out << to_string(c.kind) << "," << fmt17(c.sigma1) << "," << to_string(c.estimand) << ","
          << to_string(c.method) << "," << fmt17(c.bias_expgrad) << "," << fmt17(c.rmse_expgrad)
          << "," << fmt17(c.bias_el) << "," << fmt17(c.rmse_el) << "\n";
  }
};

inline ElCompareResult el_compare(MonteCarloConfig cfg) {
  cfg.fitter = TiltFitter::exp_grad;
  McResult eg = run_monte_carlo(cfg);
  cfg.fitter = TiltFitter::empirical_likelihood;
  McResult el = run_monte_carlo(cfg);

  ElCompareResult out;
  const auto sum_eg = summarize(eg);
  const auto sum_el = summarize(el);
  for (const auto& a : sum_eg) {
    for (const auto& b : sum_el) {
      if (a.kind == b.kind && a.sigma1 == b.sigma1 && a.estimand == b.estimand &&
          a.method == b.method) {
        out.cells.push_back({a.kind, a.sigma1, a.estimand, a.method, a.bias, a.rmse, b.bias,
                             b.rmse, a.count, b.count});
      }
    }
  }
  out.expgrad_rows = std::move(eg);
  out.el_rows = std::move(el);
  return out;
}

}  // namespace tiltbench
