#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iab/linalg.hpp"
#include "iab/rng.hpp"

namespace iab {

/// Estimates with sigma_min(P_hat) below this are treated as singular and
/// callers fall back to uniform exploration.
inline constexpr double kSingularSigmaTol = 1e-10;

/// Sufficient statistics of the observed (Z, X, Y) history. Counts are
/// kept both instrument-keyed and treatment-keyed so that UCB-ITT and
/// UCB-AT can read the same record.
struct ArmStats {
  int arms = 0;
  long long rounds = 0;
  std::vector<long long> n_z;
  std::vector<long long> n_x;
  std::vector<long long> n_zx;  // row-major m x m
  std::vector<double> reward_sum_z;
  std::vector<double> reward_sum_x;

  explicit ArmStats(int m = 0)
      : arms(m),
        n_z(static_cast<std::size_t>(m), 0),
        n_x(static_cast<std::size_t>(m), 0),
        n_zx(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0),
        reward_sum_z(static_cast<std::size_t>(m), 0.0),
        reward_sum_x(static_cast<std::size_t>(m), 0.0) {}

  long long zx(int z, int x) const {
    return n_zx[static_cast<std::size_t>(z) * static_cast<std::size_t>(arms) +
                static_cast<std::size_t>(x)];
  }
};

inline void update_stats(ArmStats& stats, int z, int x, double y) {
  if (z < 0 || z >= stats.arms || x < 0 || x >= stats.arms)
    throw std::invalid_argument("invalid label");
  ++stats.rounds;
  ++stats.n_z[static_cast<std::size_t>(z)];
  ++stats.n_x[static_cast<std::size_t>(x)];
  ++stats.n_zx[static_cast<std::size_t>(z) * static_cast<std::size_t>(stats.arms) +
               static_cast<std::size_t>(x)];
  stats.reward_sum_z[static_cast<std::size_t>(z)] += y;
  stats.reward_sum_x[static_cast<std::size_t>(x)] += y;
}

/// Direct estimate of the transition matrix, row z = n_zx[z] / n_z[z].
/// Unavailable until every instrument has been pulled.
inline std::optional<Eigen::MatrixXd> p_hat(const ArmStats& stats) {
  const int m = stats.arms;
  for (int z = 0; z < m; ++z)
    if (stats.n_z[static_cast<std::size_t>(z)] == 0) return std::nullopt;
  Eigen::MatrixXd p(m, m);
  for (int z = 0; z < m; ++z)
    for (int x = 0; x < m; ++x)
      p(z, x) = static_cast<double>(stats.zx(z, x)) /
                static_cast<double>(stats.n_z[static_cast<std::size_t>(z)]);
  return p;
}

/// Direct estimate of the instrument means mu_tilde.
inline std::optional<Eigen::VectorXd> mu_tilde_hat(const ArmStats& stats) {
  const int m = stats.arms;
  Eigen::VectorXd v(m);
  for (int z = 0; z < m; ++z) {
    if (stats.n_z[static_cast<std::size_t>(z)] == 0) return std::nullopt;
    v(z) = stats.reward_sum_z[static_cast<std::size_t>(z)] /
           static_cast<double>(stats.n_z[static_cast<std::size_t>(z)]);
  }
  return v;
}

/// Everything the 2SLS-family policies derive from the stats, computed at
/// most once per round and cached by PolicyState.
struct TwoStageEstimate {
  Eigen::MatrixXd p_hat;
  Eigen::VectorXd mu_tilde_hat;
  double sigma_min = 0.0;
  std::optional<Eigen::VectorXd> mu_hat;  // absent when P_hat is singular
};

inline std::optional<TwoStageEstimate> two_stage_estimate(const ArmStats& stats) {
  std::optional<Eigen::MatrixXd> p = p_hat(stats);
  if (!p) return std::nullopt;
  TwoStageEstimate est;
  est.p_hat = std::move(*p);
  est.mu_tilde_hat = *mu_tilde_hat(stats);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(est.p_hat,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  est.sigma_min = svd.singularValues().tail(1)(0);
  if (est.sigma_min >= kSingularSigmaTol) est.mu_hat = svd.solve(est.mu_tilde_hat);
  return est;
}

/// Plug-in 2SLS estimate of the treatment means: solves
/// P_hat * mu_hat = mu_tilde_hat. Absent when some instrument is
/// unobserved or P_hat is singular.
inline std::optional<Eigen::VectorXd> mu_hat_2sls(const ArmStats& stats) {
  std::optional<TwoStageEstimate> est = two_stage_estimate(stats);
  if (!est) return std::nullopt;
  return est->mu_hat;
}

enum class PolicyKind { UcbItt, UcbAt, EpsDecay, FixedSchedule, Adaptive, PinnedArm };

struct PolicySpec {
  PolicyKind kind = PolicyKind::UcbItt;
  std::optional<double> alpha;  // EpsDecay / FixedSchedule
  std::optional<double> gamma;  // Adaptive
  double ucb_c = 1.0;
  int pinned_arm = 0;  // PinnedArm, 0-based
};

/// Parses the config-string forms: "ucb-itt", "ucb-at",
/// "2sls-eps-decay:alpha=<f>", "2sls-fixed:alpha=<f>",
/// "2sls-adaptive:gamma=<f>". The alpha/gamma arguments may be omitted
/// when the experiment resolves them (gamma_times_thm8 mode).
/// "pinned:arm=<k>" (1-based) is a test-only policy that always pulls one
/// arm. Throws std::invalid_argument on anything else.
inline PolicySpec parse_policy_spec(const std::string& text) {
  const std::size_t colon = text.find(':');
  const std::string name = text.substr(0, colon);
  PolicySpec spec;
  if (name == "ucb-itt") {
    spec.kind = PolicyKind::UcbItt;
  } else if (name == "ucb-at") {
    spec.kind = PolicyKind::UcbAt;
  } else if (name == "2sls-eps-decay") {
    spec.kind = PolicyKind::EpsDecay;
  } else if (name == "2sls-fixed") {
    spec.kind = PolicyKind::FixedSchedule;
  } else if (name == "2sls-adaptive") {
    spec.kind = PolicyKind::Adaptive;
  } else if (name == "pinned") {
    spec.kind = PolicyKind::PinnedArm;
  } else {
    throw std::invalid_argument("unknown policy \"" + name + "\"");
  }

  std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string item = rest.substr(0, comma);
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("malformed policy option \"" + item + "\"");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed policy option \"" + item + "\"");
    }
    if (key == "alpha" &&
        (spec.kind == PolicyKind::EpsDecay || spec.kind == PolicyKind::FixedSchedule)) {
      spec.alpha = value;
    } else if (key == "gamma" && spec.kind == PolicyKind::Adaptive) {
      spec.gamma = value;
    } else if (key == "c" &&
               (spec.kind == PolicyKind::UcbItt || spec.kind == PolicyKind::UcbAt)) {
      spec.ucb_c = value;
    } else if (key == "arm" && spec.kind == PolicyKind::PinnedArm) {
      spec.pinned_arm = static_cast<int>(value) - 1;
    } else {
      throw std::invalid_argument("unknown option \"" + key + "\" for policy \"" + name +
                                  "\"");
    }
  }
  return spec;
}

inline std::string policy_label(const PolicySpec& spec) {
  char buf[64];
  switch (spec.kind) {
    case PolicyKind::UcbItt:
      return "ucb-itt";
    case PolicyKind::UcbAt:
      return "ucb-at";
    case PolicyKind::EpsDecay:
      std::snprintf(buf, sizeof(buf), "2sls-eps-decay:alpha=%.12g",
                    spec.alpha.value_or(0.0));
      return buf;
    case PolicyKind::FixedSchedule:
      std::snprintf(buf, sizeof(buf), "2sls-fixed:alpha=%.12g", spec.alpha.value_or(0.0));
      return buf;
    case PolicyKind::Adaptive:
      std::snprintf(buf, sizeof(buf), "2sls-adaptive:gamma=%.12g",
                    spec.gamma.value_or(0.0));
      return buf;
    case PolicyKind::PinnedArm:
      std::snprintf(buf, sizeof(buf), "pinned:arm=%d", spec.pinned_arm + 1);
      return buf;
  }
  return "unknown";
}

/// Per-episode mutable policy state. Policies see only their observed
/// (Z, X, Y) history; they never touch Unit internals.
struct PolicyState {
  PolicySpec spec;
  double psi = 0.0;  // subgaussian scale used by UCB bonuses and adaptive alpha
  ArmStats stats;

  PolicyState(const PolicySpec& s, int arms, double psi_in)
      : spec(s), psi(psi_in), stats(arms) {}

  const std::optional<TwoStageEstimate>& estimate() const {
    if (!cache_) cache_ = two_stage_estimate(stats);
    return *cache_;
  }

  void invalidate_cache() { cache_.reset(); }

 private:
  mutable std::optional<std::optional<TwoStageEstimate>> cache_;
};

inline PolicyState make_policy(const PolicySpec& spec, int arms, double psi) {
  if (spec.kind == PolicyKind::EpsDecay || spec.kind == PolicyKind::FixedSchedule) {
    if (!spec.alpha || *spec.alpha <= 0.0)
      throw std::invalid_argument("alpha must be positive");
  }
  if (spec.kind == PolicyKind::Adaptive) {
    if (!spec.gamma || *spec.gamma <= 0.0)
      throw std::invalid_argument("gamma must be positive");
    if (psi <= 0.0) throw std::invalid_argument("psi must be positive");
  }
  if (spec.kind == PolicyKind::PinnedArm &&
      (spec.pinned_arm < 0 || spec.pinned_arm >= arms))
    throw std::invalid_argument("pinned arm out of range");
  return PolicyState(spec, arms, psi);
}

namespace detail {

inline int lowest_argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

inline int lowest_argmin_count(const std::vector<long long>& counts) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(counts.size()); ++i)
    if (counts[static_cast<std::size_t>(i)] < counts[static_cast<std::size_t>(best)])
      best = i;
  return best;
}

inline double adaptive_alpha_from(const std::optional<TwoStageEstimate>& est, int m,
                                  double gamma, double psi) {
  if (!est || !est->mu_hat) return 0.0;
  const Eigen::VectorXd& mu = *est->mu_hat;
  const double top = mu.maxCoeff();
  double delta = std::numeric_limits<double>::infinity();
  for (int z = 0; z < mu.size(); ++z) {
    const double gap = top - mu(z);
    if (gap > 0.0 && gap < delta) delta = gap;
  }
  if (!std::isfinite(delta)) return 0.0;
  const double sigma2 = est->sigma_min * est->sigma_min;
  return gamma * sigma2 * delta * delta /
         (8.0 * static_cast<double>(m) * (delta + std::sqrt(2.0 * psi)));
}

}  // namespace detail

/// Greedy 2SLS arm: argmax of mu_hat with lowest-index tie-break. Falls
/// back to a uniformly random arm from the exploration stream when the
/// estimator is unavailable or singular.
inline int greedy_arm(const PolicyState& state, RngStream& fallback) {
  const std::optional<TwoStageEstimate>& est = state.estimate();
  if (!est || !est->mu_hat) return fallback.uniform_int(state.stats.arms);
  return detail::lowest_argmax(*est->mu_hat);
}

inline int greedy_arm(const ArmStats& stats, RngStream& fallback) {
  std::optional<TwoStageEstimate> est = two_stage_estimate(stats);
  if (!est || !est->mu_hat) return fallback.uniform_int(stats.arms);
  return detail::lowest_argmax(*est->mu_hat);
}

/// Data-driven exploration rate of 2SLS-adaptive:
///   alpha_hat = gamma * sigma_min(P_hat)^2 * delta_hat^2
///               / (8 m (delta_hat + sqrt(2 psi)))
/// with delta_hat the smallest strictly positive gap below max_z mu_hat_z,
/// or 0 when no such gap exists or the estimator is unavailable. The
/// denominator is deliberately left unsquared, matching the algorithm as
/// published.
inline double adaptive_alpha(const ArmStats& stats, double gamma, double psi) {
  if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  if (psi <= 0.0) throw std::invalid_argument("psi must be positive");
  return detail::adaptive_alpha_from(two_stage_estimate(stats), stats.arms, gamma, psi);
}

/// Chooses the arm to pull in round t (1-based). Policy randomization
/// draws from `policy_rng`; the greedy fallback draws from `fallback_rng`.
inline int policy_select(PolicyState& state, long long t, RngStream& policy_rng,
                         RngStream& fallback_rng) {
  const ArmStats& stats = state.stats;
  const int m = stats.arms;
  switch (state.spec.kind) {
    case PolicyKind::UcbItt: {
      for (int z = 0; z < m; ++z)
        if (stats.n_z[static_cast<std::size_t>(z)] == 0) return z;
      Eigen::VectorXd index(m);
      for (int z = 0; z < m; ++z) {
        const double n = static_cast<double>(stats.n_z[static_cast<std::size_t>(z)]);
        index(z) = stats.reward_sum_z[static_cast<std::size_t>(z)] / n +
                   state.spec.ucb_c *
                       std::sqrt(2.0 * state.psi * std::log(static_cast<double>(t)) / n);
      }
      return detail::lowest_argmax(index);
    }
    case PolicyKind::UcbAt: {
      Eigen::VectorXd index(m);
      for (int x = 0; x < m; ++x) {
        const long long count = stats.n_x[static_cast<std::size_t>(x)];
        if (count == 0) {
          index(x) = std::numeric_limits<double>::infinity();
          continue;
        }
        const double n = static_cast<double>(count);
        index(x) = stats.reward_sum_x[static_cast<std::size_t>(x)] / n +
                   state.spec.ucb_c *
                       std::sqrt(2.0 * state.psi * std::log(static_cast<double>(t)) / n);
      }
      return detail::lowest_argmax(index);
    }
    case PolicyKind::EpsDecay: {
      const double alpha = state.spec.alpha.value();
      const double p_explore =
          std::min(1.0, static_cast<double>(m) / (alpha * static_cast<double>(t)));
      if (policy_rng.next_double() < p_explore) return policy_rng.uniform_int(m);
      return greedy_arm(state, fallback_rng);
    }
    case PolicyKind::FixedSchedule: {
      const double alpha = state.spec.alpha.value();
      const int z0 = detail::lowest_argmin_count(stats.n_z);
      if (static_cast<double>(stats.n_z[static_cast<std::size_t>(z0)]) <
          std::log(static_cast<double>(t)) / alpha)
        return z0;
      return greedy_arm(state, fallback_rng);
    }
    case PolicyKind::Adaptive: {
      const double alpha_hat = detail::adaptive_alpha_from(
          state.estimate(), m, state.spec.gamma.value(), state.psi);
      const int z0 = detail::lowest_argmin_count(stats.n_z);
      if (alpha_hat == 0.0) return z0;  // threshold is +infinity
      if (static_cast<double>(stats.n_z[static_cast<std::size_t>(z0)]) <
          std::log(static_cast<double>(t)) / alpha_hat)
        return z0;
      return greedy_arm(state, fallback_rng);
    }
    case PolicyKind::PinnedArm:
      return state.spec.pinned_arm;
  }
  return 0;
}

/// Records the revealed (z, x, y) triple. All policies record the full
/// triple even when they only read part of it.
inline void policy_update(PolicyState& state, int z, int x, double y) {
  update_stats(state.stats, z, x, y);
  state.invalidate_cache();
}

}  // namespace iab
