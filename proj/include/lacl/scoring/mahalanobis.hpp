#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/tensor.hpp"

namespace lacl {

// Class means with one covariance shared by all classes. `covariance`
// already includes the ridge; `precision` is its inverse.
struct GaussianStats {
  std::vector<int> classes;
  Eigen::MatrixXd means;  // one row per class
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd precision;
  double ridge = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }

  // From explicit moments; covariance + ridge * I must be positive definite.
  static GaussianStats from_moments(std::vector<int> classes, Eigen::MatrixXd means, Eigen::MatrixXd cov,
                                    double ridge) {
    if (ridge < 0.0) throw Error("invalid-ridge", "ridge must be non-negative");
    if (cov.rows() != cov.cols() || cov.rows() != means.cols() ||
        static_cast<std::size_t>(means.rows()) != classes.size())
      throw Error("shape-mismatch", "gaussian moments");
    GaussianStats s;
    s.classes = std::move(classes);
    s.means = std::move(means);
    s.covariance = cov + ridge * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    s.ridge = ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(s.covariance);
    if (llt.info() != Eigen::Success) throw Error("singular-covariance", "covariance is not positive definite");
    s.precision = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
    if (!s.precision.allFinite()) throw Error("singular-covariance", "non-finite precision");
    return s;
  }
};

// Per-class means and the pooled within-class covariance (divided by N).
inline GaussianStats mahalanobis_fit(const Tensor& features, std::span<const int> labels, double ridge = 1e-6) {
  if (!(ridge > 0.0)) throw Error("invalid-ridge", "ridge must be positive");
  if (features.empty() || labels.size() != features.rows()) throw Error("shape-mismatch", "features vs labels");
  const auto n = static_cast<Eigen::Index>(features.rows());
  const auto d = static_cast<Eigen::Index>(features.cols());
  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) members[labels[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<int> classes;
  Eigen::MatrixXd means(static_cast<Eigen::Index>(members.size()), d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index row = 0;
  for (const auto& [cls, idx] : members) {
    if (idx.size() < 2)
      throw Error("insufficient-class-examples", "class " + std::to_string(cls) + " has fewer than 2 examples");
    Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(d);
    for (auto i : idx)
      for (Eigen::Index j = 0; j < d; ++j) mu(j) += features(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    mu /= static_cast<double>(idx.size());
    for (auto i : idx) {
      Eigen::RowVectorXd x(d);
      for (Eigen::Index j = 0; j < d; ++j) x(j) = features(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      x -= mu;
      cov.noalias() += x.transpose() * x;
    }
    classes.push_back(cls);
    means.row(row++) = mu;
  }
  cov /= static_cast<double>(n);
  return GaussianStats::from_moments(std::move(classes), std::move(means), std::move(cov), ridge);
}

struct MahalanobisResult {
  double distance = 0.0;  // min over classes of the squared distance
  int label = -1;         // the minimizing class (ties keep the first)
};

inline double squared_mahalanobis(std::span<const double> x, const GaussianStats& s, Eigen::Index cls) {
  const Eigen::Index d = s.means.cols();
  Eigen::VectorXd diff(d);
  for (Eigen::Index j = 0; j < d; ++j) diff(j) = x[static_cast<std::size_t>(j)] - s.means(cls, j);
  return std::max(0.0, diff.dot(s.precision * diff));
}

inline MahalanobisResult mahalanobis_nearest(std::span<const double> x, const GaussianStats& s) {
  if (x.size() != s.dim()) throw Error("shape-mismatch", "feature width vs fitted width");
  MahalanobisResult best{std::numeric_limits<double>::infinity(), -1};
  for (Eigen::Index c = 0; c < s.means.rows(); ++c) {
    const double dist = squared_mahalanobis(x, s, c);
    if (dist < best.distance) best = {dist, s.classes[static_cast<std::size_t>(c)]};
  }
  return best;
}

// Negated squared distance to the nearest class mean; higher means more IND.
inline double mahalanobis_score(std::span<const double> x, const GaussianStats& s) {
  return -mahalanobis_nearest(x, s).distance;
}

}  // namespace lacl
