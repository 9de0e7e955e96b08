#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <vector>

#include "iab/linalg.hpp"
#include "iab/population.hpp"
#include "iab/rng.hpp"

namespace iab {

/// Absolute tolerance for declaring ties inside argmax sets. Ground-truth
/// means are exact rationals here, so genuine ties (Example 2's arms 2-4)
/// are captured without admitting spurious ones.
inline constexpr double kArgmaxTieTol = 1e-9;

/// Ground truth of an instance: treatment means mu, instrument means
/// mu_tilde, the transition matrix P_zx = P(chi(z) = x), optimal sets, and
/// the complier mass. Visible to the simulator and regret accounting only.
struct OracleTruth {
  Eigen::VectorXd mu;
  Eigen::VectorXd mu_tilde;
  Eigen::MatrixXd P;
  double sigma_min = 0.0;
  std::vector<int> z_star_set;
  std::vector<int> x_star_set;
  std::map<ComplianceType, std::vector<int>> x_star_by_type;
  double p_complier = 0.0;
  double mu_star = 0.0;
  double mu_tilde_star = 0.0;
};

namespace detail {

inline OracleTruth truth_from_type_law(const std::vector<TypeLaw>& law, int m) {
  OracleTruth truth;
  truth.mu = Eigen::VectorXd::Zero(m);
  truth.mu_tilde = Eigen::VectorXd::Zero(m);
  truth.P = Eigen::MatrixXd::Zero(m, m);
  for (const TypeLaw& entry : law) {
    for (int x = 0; x < m; ++x)
      truth.mu(x) += entry.p * entry.means[static_cast<std::size_t>(x)];
    for (int z = 0; z < m; ++z) {
      const int x = entry.type(z);
      truth.mu_tilde(z) += entry.p * entry.means[static_cast<std::size_t>(x)];
      truth.P(z, x) += entry.p;
    }
    if (entry.type.is_complier()) truth.p_complier += entry.p;
    Eigen::VectorXd conditional =
        Eigen::Map<const Eigen::VectorXd>(entry.means.data(), m);
    truth.x_star_by_type[entry.type] = argmax_set(conditional, kArgmaxTieTol);
  }
  truth.sigma_min = smallest_singular_value(truth.P);
  truth.z_star_set = argmax_set(truth.mu_tilde, kArgmaxTieTol);
  truth.x_star_set = argmax_set(truth.mu, kArgmaxTieTol);
  truth.mu_star = truth.mu.maxCoeff();
  truth.mu_tilde_star = truth.mu_tilde.maxCoeff();
  return truth;
}

}  // namespace detail

/// Exact ground truth by enumerating the population's type law. Total on
/// every population the library ships (tables, and coupled recipes with a
/// registered enumeration).
inline OracleTruth analytic_truth(const PopulationSpec& spec) {
  return detail::truth_from_type_law(enumerate_type_law(spec), spec.arms);
}

/// analytic_truth shape plus per-entry standard errors of the estimates.
struct McTruth {
  OracleTruth estimate;
  Eigen::VectorXd mu_se;
  Eigen::VectorXd mu_tilde_se;
  Eigen::MatrixXd P_se;
  double p_complier_se = 0.0;
  long long samples = 0;
};

/// Monte-Carlo estimate of the ground truth from n independent units.
inline McTruth mc_truth(const PopulationSpec& spec, long long n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("empty sample");
  const int m = spec.arms;
  UnitSampler sampler(spec);

  Eigen::VectorXd mu_sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mu_sumsq = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mt_sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mt_sumsq = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd p_count = Eigen::MatrixXd::Zero(m, m);
  long long compliers = 0;
  struct TypeAccumulator {
    long long count = 0;
    Eigen::VectorXd sum;
  };
  std::map<ComplianceType, TypeAccumulator> by_type;

  for (long long i = 0; i < n; ++i) {
    const Unit unit = sampler(rng);
    for (int x = 0; x < m; ++x) {
      const double y = unit.potential_rewards[static_cast<std::size_t>(x)];
      mu_sum(x) += y;
      mu_sumsq(x) += y * y;
    }
    for (int z = 0; z < m; ++z) {
      const int x = unit.chi(z);
      const double y = unit.potential_rewards[static_cast<std::size_t>(x)];
      mt_sum(z) += y;
      mt_sumsq(z) += y * y;
      p_count(z, x) += 1.0;
    }
    if (unit.chi.is_complier()) ++compliers;
    TypeAccumulator& acc = by_type[unit.chi];
    if (acc.count == 0) acc.sum = Eigen::VectorXd::Zero(m);
    ++acc.count;
    acc.sum += Eigen::Map<const Eigen::VectorXd>(unit.potential_rewards.data(), m);
  }

  const double dn = static_cast<double>(n);
  McTruth result;
  result.samples = n;
  OracleTruth& est = result.estimate;
  est.mu = mu_sum / dn;
  est.mu_tilde = mt_sum / dn;
  est.P = p_count / dn;
  result.mu_se.resize(m);
  result.mu_tilde_se.resize(m);
  result.P_se.resize(m, m);
  for (int i = 0; i < m; ++i) {
    const double var_mu = std::max(0.0, mu_sumsq(i) / dn - est.mu(i) * est.mu(i));
    const double var_mt =
        std::max(0.0, mt_sumsq(i) / dn - est.mu_tilde(i) * est.mu_tilde(i));
    result.mu_se(i) = std::sqrt(var_mu / dn);
    result.mu_tilde_se(i) = std::sqrt(var_mt / dn);
    for (int j = 0; j < m; ++j) {
      const double p = est.P(i, j);
      result.P_se(i, j) = std::sqrt(std::max(0.0, p * (1.0 - p)) / dn);
    }
  }
  est.p_complier = static_cast<double>(compliers) / dn;
  result.p_complier_se =
      std::sqrt(std::max(0.0, est.p_complier * (1.0 - est.p_complier)) / dn);
  est.sigma_min = smallest_singular_value(est.P);
  est.z_star_set = argmax_set(est.mu_tilde, kArgmaxTieTol);
  est.x_star_set = argmax_set(est.mu, kArgmaxTieTol);
  est.mu_star = est.mu.maxCoeff();
  est.mu_tilde_star = est.mu_tilde.maxCoeff();
  for (const auto& [type, acc] : by_type) {
    Eigen::VectorXd conditional = acc.sum / static_cast<double>(acc.count);
    est.x_star_by_type[type] = argmax_set(conditional, kArgmaxTieTol);
  }
  return result;
}

}  // namespace iab
