#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace iab {

/// Evaluators for the concentration lemmas and the regret-bound
/// thresholds. All of them return the quoted expressions verbatim; values
/// above 1 are returned as-is (a vacuous bound is still informative).

/// P(||P_hat - P||_inf > eps | pulls) <= sum_z exp(m - n_z eps^2 / 8).
inline double lemma1_bound(int m, const std::vector<double>& n_z, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
  double total = 0.0;
  for (double n : n_z) total += std::exp(static_cast<double>(m) - n * eps * eps / 8.0);
  return total;
}

/// P(||P_hat^{-1}||_inf too large) <= sum_z exp(m - n_z sigma^2 xi^2 / (8m)).
inline double lemma2_bound(int m, const std::vector<double>& n_z, double sigma_lower,
                           double xi) {
  if (xi <= 0.0 || xi >= 1.0) throw std::invalid_argument("xi out of range");
  if (sigma_lower <= 0.0) throw std::invalid_argument("sigma_lower must be positive");
  double total = 0.0;
  for (double n : n_z)
    total += std::exp(static_cast<double>(m) -
                      n * sigma_lower * sigma_lower * xi * xi / (8.0 * m));
  return total;
}

/// P(|mu_tilde_hat_z - P_hat_z mu| > eps | pulls) <= 2 exp(-n eps^2 / (4 psi)).
inline double lemma3_bound(double n, double eps, double psi) {
  if (n < 0.0) throw std::invalid_argument("n must be nonnegative");
  if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
  if (psi <= 0.0) throw std::invalid_argument("psi must be positive");
  return 2.0 * std::exp(-n * eps * eps / (4.0 * psi));
}

/// P(||mu_hat - mu||_inf > eps | pulls)
///   <= 2 sum_z exp(m - n_z sigma^2 eps^2 / (2m (2 eps + sqrt(2 psi))^2)).
inline double lemma4_bound(int m, const std::vector<double>& n_z, double sigma_lower,
                           double psi, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
  if (psi <= 0.0) throw std::invalid_argument("psi must be positive");
  if (sigma_lower <= 0.0) throw std::invalid_argument("sigma_lower must be positive");
  const double denom = 2.0 * m * std::pow(2.0 * eps + std::sqrt(2.0 * psi), 2);
  double total = 0.0;
  for (double n : n_z)
    total += std::exp(static_cast<double>(m) -
                      n * sigma_lower * sigma_lower * eps * eps / denom);
  return 2.0 * total;
}

namespace detail {

inline double min_suboptimal_gap(const std::vector<double>& mu) {
  double mu_star = mu.front();
  for (double v : mu) mu_star = std::max(mu_star, v);
  double gap = -1.0;
  for (double v : mu) {
    const double g = mu_star - v;
    if (g > 1e-9 && (gap < 0.0 || g < gap)) gap = g;
  }
  if (gap < 0.0)
    throw std::invalid_argument("no suboptimal treatment; threshold undefined");
  return gap;
}

inline double alpha_threshold_core(double sigma_min, int m,
                                   const std::vector<double>& mu, double psi) {
  if (m < 2) throw std::invalid_argument("m must be at least 2");
  if (psi <= 0.0) throw std::invalid_argument("psi must be positive");
  const double gap = min_suboptimal_gap(mu);
  const double inner =
      std::min(1.0 / (8.0 * m), gap * gap / (16.0 * m * psi * psi));
  return sigma_min * sigma_min * inner;
}

}  // namespace detail

/// Largest alpha admitted by the epsilon-decay regret bound:
///   2 alpha <= sigma_min(P)^2 min{1/(8m), gap^2/(16 m psi^2)},  alpha <= 1/2.
inline double thm7_alpha_threshold(double sigma_min, int m, const std::vector<double>& mu,
                                   double psi) {
  return std::min(0.5, detail::alpha_threshold_core(sigma_min, m, mu, psi) / 2.0);
}

/// Supremum of alphas admitted by the fixed-schedule regret bound:
///   alpha < sigma_min(P)^2 min{1/(8m), gap^2/(16 m psi^2)}.
inline double thm8_alpha_threshold(double sigma_min, int m, const std::vector<double>& mu,
                                   double psi) {
  return detail::alpha_threshold_core(sigma_min, m, mu, psi);
}

/// Coefficient of log(T) in the CRegret bounds:
///   p_complier * sum_x (mu_star - mu_x) / alpha.
/// The additive constant C of the theorems is not estimated.
inline double regret_bound_log_coefficient(double p_complier,
                                           const std::vector<double>& mu, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("alpha must be positive");
  double mu_star = mu.front();
  for (double v : mu) mu_star = std::max(mu_star, v);
  double gap_sum = 0.0;
  for (double v : mu) gap_sum += mu_star - v;
  return p_complier * gap_sum / alpha;
}

}  // namespace iab
