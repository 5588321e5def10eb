#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tiltbench/rng.hpp"
#include "tiltbench/util.hpp"

namespace tiltbench {

/// Rows of (covariate vector x, binary outcome y, missingness indicator r).
/// By convention outcomes[i] == 0 whenever missing_mask[i] == 0; the true
/// outcome of a missing row is never stored. Immutable after construction.
struct MnarDataset {
  Eigen::MatrixXd covariates;   // n x d
  Eigen::VectorXi outcomes;     // in {0,1}
  Eigen::VectorXi missing_mask; // r in {0,1}; r=0 means y missing

  int n() const { return static_cast<int>(covariates.rows()); }
  int d() const { return static_cast<int>(covariates.cols()); }
  int n_observed() const { return missing_mask.sum(); }
  int n_missing() const { return n() - n_observed(); }
  double pi_r() const { return static_cast<double>(n_observed()) / static_cast<double>(n()); }

  Eigen::VectorXd x(int i) const { return covariates.row(i); }

  void validate() const {
    if (covariates.rows() < 1 || covariates.cols() < 1)
      throw std::invalid_argument("MnarDataset: need n >= 1 and d >= 1");
    if (outcomes.size() != covariates.rows() || missing_mask.size() != covariates.rows())
      throw std::invalid_argument("MnarDataset: column length mismatch");
    if (!covariates.allFinite())
      throw std::invalid_argument("MnarDataset: non-finite covariate");
    for (int i = 0; i < n(); ++i) {
      if (outcomes[i] != 0 && outcomes[i] != 1)
        throw std::invalid_argument("MnarDataset: outcome not in {0,1} at row " + std::to_string(i));
      if (missing_mask[i] != 0 && missing_mask[i] != 1)
        throw std::invalid_argument("MnarDataset: r not in {0,1} at row " + std::to_string(i));
      if (missing_mask[i] == 0 && outcomes[i] != 0)
        throw std::invalid_argument("MnarDataset: nonzero outcome with r=0 at row " + std::to_string(i));
    }
  }
};

inline MnarDataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXi y, Eigen::VectorXi r) {
  MnarDataset ds{std::move(X), std::move(y), std::move(r)};
  ds.validate();
  return ds;
}

/// Estimate of P(R = 1); requires both arms present.
struct PiR {
  double value;
  explicit PiR(double v) : value(v) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("PiR: value must be in (0,1)");
  }
};

inline PiR pi_r_of(const MnarDataset& ds) { return PiR(ds.pi_r()); }

enum class CsvMode { strict, lenient };

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& cell, std::size_t line_no, const std::string& what) {
  const std::string t = trim(cell);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw std::runtime_error("line " + std::to_string(line_no) + ": malformed " + what + " '" + cell + "'");
  if (!std::isfinite(v))
    throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite " + what);
  return v;
}

}  // namespace detail

/// Loads the `x1,...,xd,y,r` format. The y cell may be empty (or 0) when r=0.
/// strict mode rejects an observed-looking y on an r=0 row; lenient zeroes it
/// and appends a note to `warnings` if given.
inline MnarDataset load_csv(const std::string& path, CsvMode mode = CsvMode::strict,
                            std::string* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': empty file");
  auto header = detail::split_csv_line(line);
  if (header.size() < 3) throw std::runtime_error("'" + path + "': header must be x1,...,xd,y,r");
  const int d = static_cast<int>(header.size()) - 2;
  for (int j = 0; j < d; ++j) {
    if (detail::trim(header[static_cast<std::size_t>(j)]) != "x" + std::to_string(j + 1))
      throw std::runtime_error("'" + path + "': bad header column " + std::to_string(j + 1));
  }
  if (detail::trim(header[static_cast<std::size_t>(d)]) != "y" ||
      detail::trim(header[static_cast<std::size_t>(d) + 1]) != "r")
    throw std::runtime_error("'" + path + "': header must end with y,r");

  std::vector<std::vector<double>> rows;
  std::vector<int> ys, rs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != d + 2)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(d + 2) + " cells, got " + std::to_string(cells.size()));
    std::vector<double> xrow(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      xrow[static_cast<std::size_t>(j)] =
          detail::parse_double(cells[static_cast<std::size_t>(j)], line_no, "covariate");

    const std::string rcell = detail::trim(cells[static_cast<std::size_t>(d) + 1]);
    int r;
    if (rcell == "0") r = 0;
    else if (rcell == "1") r = 1;
    else throw std::runtime_error("line " + std::to_string(line_no) + ": r must be 0 or 1, got '" + rcell + "'");

    const std::string ycell = detail::trim(cells[static_cast<std::size_t>(d)]);
    int y;
    if (ycell.empty()) {
      if (r == 1) throw std::runtime_error("line " + std::to_string(line_no) + ": empty y with r=1");
      y = 0;
    } else if (ycell == "0" || ycell == "1") {
      y = ycell == "1" ? 1 : 0;
      if (r == 0 && y != 0) {
        if (mode == CsvMode::strict)
          throw std::runtime_error("line " + std::to_string(line_no) + ": observed outcome with r=0");
        if (warnings)
          *warnings += "line " + std::to_string(line_no) + ": zeroed outcome on r=0 row\n";
        y = 0;
      }
    } else {
      throw std::runtime_error("line " + std::to_string(line_no) + ": y must be 0, 1 or empty, got '" + ycell + "'");
    }

    rows.push_back(std::move(xrow));
    ys.push_back(y);
    rs.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("'" + path + "': no data rows");

  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXi yv(n), rv(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    yv[i] = ys[static_cast<std::size_t>(i)];
    rv[i] = rs[static_cast<std::size_t>(i)];
  }
  return make_dataset(std::move(X), std::move(yv), std::move(rv));
}

/// Writes the CSV form; finite values at 17 significant digits so that
/// save/load round-trips bit-exactly.
inline void save_csv(const MnarDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (int j = 0; j < ds.d(); ++j) out << "x" << (j + 1) << ",";
  out << "y,r\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.d(); ++j) out << fmt17(ds.covariates(i, j)) << ",";
    out << ds.outcomes[i] << "," << ds.missing_mask[i] << "\n";
  }
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

/// Disjoint uniform random partition; the first split gets
/// clamp(floor(fraction*n), 1, n-1) rows. Row order is preserved within
/// each split. Deterministic under seed.
inline std::pair<MnarDataset, MnarDataset> split_dataset(const MnarDataset& ds, double fraction,
                                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_dataset: fraction must be in (0,1)");
  const int n = ds.n();
  if (n < 2) throw std::invalid_argument("split_dataset: fraction yields empty split");
  int n_a = static_cast<int>(std::floor(fraction * n));
  n_a = std::max(1, std::min(n - 1, n_a));

  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<int> a(idx.begin(), idx.begin() + n_a), b(idx.begin() + n_a, idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  auto take = [&](const std::vector<int>& which) {
    MnarDataset out;
    out.covariates.resize(static_cast<Eigen::Index>(which.size()), ds.d());
    out.outcomes.resize(static_cast<Eigen::Index>(which.size()));
    out.missing_mask.resize(static_cast<Eigen::Index>(which.size()));
    for (std::size_t k = 0; k < which.size(); ++k) {
      out.covariates.row(static_cast<Eigen::Index>(k)) = ds.covariates.row(which[k]);
      out.outcomes[static_cast<Eigen::Index>(k)] = ds.outcomes[which[k]];
      out.missing_mask[static_cast<Eigen::Index>(k)] = ds.missing_mask[which[k]];
    }
    return out;
  };
  return {take(a), take(b)};
}

}  // namespace tiltbench
