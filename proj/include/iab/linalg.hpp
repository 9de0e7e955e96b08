#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <optional>
#include <vector>

namespace iab {

/// Smallest singular value, via Jacobi SVD (numerically stable on the
/// small dense matrices used here).
inline double smallest_singular_value(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues().tail(1)(0);
}

/// Operator infinity norm: maximum absolute row sum.
inline double matrix_inf_norm(const Eigen::MatrixXd& a) {
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double vector_inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Indices attaining the maximum of v within an absolute tolerance,
/// in ascending order.
inline std::vector<int> argmax_set(const Eigen::VectorXd& v, double tol) {
  std::vector<int> set;
  const double best = v.maxCoeff();
  for (int i = 0; i < v.size(); ++i)
    if (v(i) >= best - tol) set.push_back(i);
  return set;
}

}  // namespace iab
