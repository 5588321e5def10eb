#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tiltbench {

enum class FeatureMapKind { identity, polynomial };

/// Deterministic feature map t = T(x): either the identity, or all monomials
/// of total degree 1..k (constant excluded) in graded-lexicographic order,
/// e.g. d=2, k=2 -> (x1, x2, x1^2, x1*x2, x2^2).
class FeatureMap {
 public:
  static FeatureMap identity(int input_dim) {
    check_dim(input_dim);
    FeatureMap fm;
    fm.kind_ = FeatureMapKind::identity;
    fm.input_dim_ = input_dim;
    fm.output_dim_ = input_dim;
    fm.degree_ = 1;
    return fm;
  }

  static FeatureMap polynomial(int input_dim, int degree) {
    check_dim(input_dim);
    if (degree < 1) throw std::invalid_argument("FeatureMap: degree must be >= 1");
    FeatureMap fm;
    fm.kind_ = FeatureMapKind::polynomial;
    fm.input_dim_ = input_dim;
    fm.degree_ = degree;
    std::vector<int> current(static_cast<std::size_t>(input_dim), 0);
    for (int total = 1; total <= degree; ++total) {
      fm.emit_exponents(0, total, current);
    }
    fm.output_dim_ = static_cast<int>(fm.exponents_.size());
    return fm;
  }

  FeatureMapKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  int degree() const { return degree_; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim_) {
      throw std::invalid_argument("FeatureMap: expected dim " + std::to_string(input_dim_) +
                                  ", got " + std::to_string(x.size()));
    }
    if (kind_ == FeatureMapKind::identity) return x;
    Eigen::VectorXd out(output_dim_);
    for (std::size_t m = 0; m < exponents_.size(); ++m) {
      double v = 1.0;
      for (int j = 0; j < input_dim_; ++j) {
        for (int e = 0; e < exponents_[m][static_cast<std::size_t>(j)]; ++e) v *= x[j];
      }
      out[static_cast<Eigen::Index>(m)] = v;
    }
    return out;
  }

  // Maps every row of X; the workhorse for fitting code.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& X) const {
    if (X.cols() != input_dim_) {
      throw std::invalid_argument("FeatureMap: expected dim " + std::to_string(input_dim_) +
                                  ", got " + std::to_string(X.cols()));
    }
    if (kind_ == FeatureMapKind::identity) return X;
    Eigen::MatrixXd out(X.rows(), output_dim_);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out.row(i) = (*this)(Eigen::VectorXd(X.row(i))).transpose();
    }
    return out;
  }

  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind_ == FeatureMapKind::identity ? "identity" : "polynomial";
    j["input_dim"] = input_dim_;
    if (kind_ == FeatureMapKind::polynomial) j["degree"] = degree_;
    return j;
  }

  static FeatureMap from_json(const nlohmann::json& j) {
    std::string kind = j.at("kind").get<std::string>();
    int input_dim = j.at("input_dim").get<int>();
    if (kind == "identity") return identity(input_dim);
    if (kind == "polynomial") return polynomial(input_dim, j.at("degree").get<int>());
    throw std::invalid_argument("FeatureMap: unknown kind '" + kind + "'");
  }

 private:
  FeatureMap() = default;

  static void check_dim(int input_dim) {
    if (input_dim < 1) throw std::invalid_argument("FeatureMap: input_dim must be >= 1");
  }

  // Exponent vectors of one total degree, first coordinate varying slowest
  // from high to low; combined with the outer degree loop this is graded lex.
  void emit_exponents(int pos, int remaining, std::vector<int>& current) {
    if (pos == input_dim_ - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      exponents_.push_back(current);
      current[static_cast<std::size_t>(pos)] = 0;
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[static_cast<std::size_t>(pos)] = e;
      emit_exponents(pos + 1, remaining - e, current);
    }
    current[static_cast<std::size_t>(pos)] = 0;
  }

  FeatureMapKind kind_ = FeatureMapKind::identity;
  int input_dim_ = 0;
  int output_dim_ = 0;
  int degree_ = 1;
  std::vector<std::vector<int>> exponents_;
};

}  // namespace tiltbench
