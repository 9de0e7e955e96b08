#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "iab/oracle.hpp"
#include "iab/policies.hpp"
#include "iab/population.hpp"
#include "iab/regret.hpp"
#include "iab/rng.hpp"

namespace iab {

/// Powers of two up to the horizon, plus the horizon itself.
inline std::vector<long long> pow2_checkpoints(long long horizon) {
  std::vector<long long> ts;
  for (long long t = 1; t <= horizon && t > 0; t *= 2) ts.push_back(t);
  if (ts.empty() || ts.back() != horizon) ts.push_back(horizon);
  return ts;
}

/// step, 2*step, ..., plus the horizon.
inline std::vector<long long> every_checkpoints(long long step, long long horizon) {
  std::vector<long long> ts;
  for (long long t = step; t <= horizon; t += step) ts.push_back(t);
  if (ts.empty() || ts.back() != horizon) ts.push_back(horizon);
  return ts;
}

struct EpisodeConfig {
  PopulationSpec population;
  PolicySpec policy;
  long long horizon = 0;
  std::uint64_t seed = 0;
  std::vector<long long> checkpoints;  // strictly increasing, last == horizon
};

inline std::vector<std::string> validate_episode_config(const EpisodeConfig& cfg) {
  std::vector<std::string> errors;
  for (const std::string& v : validate_population(cfg.population))
    errors.push_back("population: " + v);
  if (cfg.horizon < 1) errors.push_back("horizon: must be at least 1");
  if (cfg.checkpoints.empty()) {
    errors.push_back("checkpoints: schedule is empty");
  } else {
    for (std::size_t i = 0; i + 1 < cfg.checkpoints.size(); ++i)
      if (cfg.checkpoints[i] >= cfg.checkpoints[i + 1]) {
        errors.push_back("checkpoints: not strictly increasing");
        break;
      }
    if (cfg.checkpoints.front() < 1)
      errors.push_back("checkpoints: must start at 1 or later");
    if (cfg.checkpoints.back() != cfg.horizon)
      errors.push_back("checkpoints: last entry must equal the horizon");
  }
  return errors;
}

struct EpisodeResult {
  std::vector<RegretSnapshot> checkpoints;
  ArmStats final_stats{0};
  std::optional<Eigen::MatrixXd> p_hat;
  std::optional<Eigen::VectorXd> mu_hat;
  double wall_seconds = 0.0;
};

/// Runs one episode of the protocol: sample a unit, let the policy pick an
/// instrument from its observed history, reveal (X, Y), update the policy
/// and the regret tracker. Three sub-streams are derived from the seed
/// (units / policy randomization / greedy fallback), so the unit sequence
/// is identical across policies sharing a seed.
inline EpisodeResult run_episode(const EpisodeConfig& cfg) {
  {
    std::vector<std::string> errors = validate_episode_config(cfg);
    if (!errors.empty()) {
      std::string joined = "invalid episode config:";
      for (const std::string& e : errors) joined += " [" + e + "]";
      throw std::invalid_argument(joined);
    }
  }
  const auto start = std::chrono::steady_clock::now();

  RngStream unit_rng = make_stream(cfg.seed, StreamId::Units);
  RngStream policy_rng = make_stream(cfg.seed, StreamId::Policy);
  RngStream fallback_rng = make_stream(cfg.seed, StreamId::Fallback);

  const UnitSampler sampler(cfg.population);
  const OracleTruth truth = analytic_truth(cfg.population);
  RegretTracker tracker(make_targets(truth, cfg.population.arms), cfg.checkpoints);
  PolicyState policy = make_policy(cfg.policy, cfg.population.arms, cfg.population.psi);

  for (long long t = 1; t <= cfg.horizon; ++t) {
    const Unit unit = sampler(unit_rng);
    const int z = policy_select(policy, t, policy_rng, fallback_rng);
    const int x = unit.chi(z);
    const double y = unit.potential_rewards[static_cast<std::size_t>(x)];
    policy_update(policy, z, x, y);
    tracker.update(unit, z, y);
  }

  EpisodeResult result;
  result.checkpoints = tracker.checkpoints();
  result.final_stats = policy.stats;
  if (std::optional<TwoStageEstimate> est = two_stage_estimate(policy.stats)) {
    result.p_hat = est->p_hat;
    result.mu_hat = est->mu_hat;
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

enum class RegretKind { Itt = 0, St = 1, Lct = 2, C = 3 };

inline double regret_value(const RegretSnapshot& snap, RegretKind kind) {
  switch (kind) {
    case RegretKind::Itt:
      return snap.itt;
    case RegretKind::St:
      return snap.st;
    case RegretKind::Lct:
      return snap.lct;
    case RegretKind::C:
      return snap.c;
  }
  return 0.0;
}

struct ReplicationAggregate {
  struct Row {
    long long t = 0;
    std::array<double, 4> mean{};    // indexed by RegretKind
    std::array<double, 4> median{};
    std::array<double, 4> se{};      // standard error of the mean
    double complier_rounds_median = 0.0;
  };
  std::vector<Row> rows;
  std::vector<EpisodeResult> per_seed;

  std::vector<double> median_curve(RegretKind kind) const {
    std::vector<double> curve;
    curve.reserve(rows.size());
    for (const Row& row : rows)
      curve.push_back(row.median[static_cast<std::size_t>(kind)]);
    return curve;
  }

  std::vector<long long> checkpoint_ts() const {
    std::vector<long long> ts;
    ts.reserve(rows.size());
    for (const Row& row : rows) ts.push_back(row.t);
    return ts;
  }
};

inline int simulator_thread_cap() {
  if (const char* env = std::getenv("IAB_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

inline double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

/// Runs the episode at seeds base_seed + 0 .. base_seed + n_seeds - 1 and
/// aggregates per-checkpoint statistics. The fan-out runs on up to
/// IAB_THREADS worker threads; aggregation folds results in seed order,
/// so the output is independent of scheduling.
inline ReplicationAggregate run_replications(const EpisodeConfig& base, int n_seeds,
                                             int max_threads = 0) {
  if (n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");
  std::vector<EpisodeResult> results(static_cast<std::size_t>(n_seeds));
  const int workers =
      std::min(n_seeds, max_threads > 0 ? max_threads : simulator_thread_cap());
  if (workers <= 1) {
    for (int i = 0; i < n_seeds; ++i) {
      EpisodeConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(i);
      results[static_cast<std::size_t>(i)] = run_episode(cfg);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
          EpisodeConfig cfg = base;
          cfg.seed = base.seed + static_cast<std::uint64_t>(i);
          results[static_cast<std::size_t>(i)] = run_episode(cfg);
        }
      });
    for (std::thread& th : pool) th.join();
  }

  ReplicationAggregate aggregate;
  const std::size_t n_rows = results.front().checkpoints.size();
  aggregate.rows.resize(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    ReplicationAggregate::Row& row = aggregate.rows[r];
    row.t = results.front().checkpoints[r].t;
    std::vector<double> complier_counts;
    for (int k = 0; k < 4; ++k) {
      std::vector<double> values;
      values.reserve(static_cast<std::size_t>(n_seeds));
      for (const EpisodeResult& res : results)
        values.push_back(
            regret_value(res.checkpoints[r], static_cast<RegretKind>(k)));
      double sum = 0.0;
      for (double v : values) sum += v;
      const double mean = sum / static_cast<double>(n_seeds);
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      row.mean[static_cast<std::size_t>(k)] = mean;
      row.median[static_cast<std::size_t>(k)] = detail::median_of(values);
      row.se[static_cast<std::size_t>(k)] =
          n_seeds > 1 ? std::sqrt(ss / (n_seeds - 1.0) / n_seeds) : 0.0;
    }
    for (const EpisodeResult& res : results)
      complier_counts.push_back(static_cast<double>(res.checkpoints[r].complier_rounds));
    row.complier_rounds_median = detail::median_of(complier_counts);
  }
  aggregate.per_seed = std::move(results);
  return aggregate;
}

struct GrowthFit {
  double log_coefficient = 0.0;
  double linear_slope = 0.0;
  double r2_log = 0.0;
  double r2_linear = 0.0;
};

/// Least-squares fits of value against ln t and against t over the last
/// half of the checkpoints, used to discriminate logarithmic from linear
/// regret growth at desk scale.
inline GrowthFit fit_growth(const std::vector<long long>& ts,
                            const std::vector<double>& values) {
  if (ts.size() != values.size()) throw std::invalid_argument("size mismatch");
  if (ts.size() < 4) throw std::invalid_argument("insufficient checkpoints");
  const std::size_t lo = ts.size() / 2;
  const std::size_t n = ts.size() - lo;

  const auto fit = [&](bool log_abscissa, double& slope, double& r2) {
    double su = 0.0, sv = 0.0;
    for (std::size_t i = lo; i < ts.size(); ++i) {
      const double u = log_abscissa ? std::log(static_cast<double>(ts[i]))
                                    : static_cast<double>(ts[i]);
      su += u;
      sv += values[i];
    }
    const double mu = su / static_cast<double>(n);
    const double mv = sv / static_cast<double>(n);
    double suu = 0.0, suv = 0.0, svv = 0.0;
    for (std::size_t i = lo; i < ts.size(); ++i) {
      const double u = (log_abscissa ? std::log(static_cast<double>(ts[i]))
                                     : static_cast<double>(ts[i])) -
                       mu;
      const double v = values[i] - mv;
      suu += u * u;
      suv += u * v;
      svv += v * v;
    }
    slope = suu > 0.0 ? suv / suu : 0.0;
    if (svv <= 0.0) {
      r2 = 1.0;  // constant curve: perfectly explained with zero slope
      return;
    }
    double ss_res = 0.0;
    for (std::size_t i = lo; i < ts.size(); ++i) {
      const double u = (log_abscissa ? std::log(static_cast<double>(ts[i]))
                                     : static_cast<double>(ts[i])) -
                       mu;
      const double resid = (values[i] - mv) - slope * u;
      ss_res += resid * resid;
    }
    r2 = 1.0 - ss_res / svv;
  };

  GrowthFit out;
  fit(true, out.log_coefficient, out.r2_log);
  fit(false, out.linear_slope, out.r2_linear);
  return out;
}

/// Desk-scale growth classification. A curve counts as sublinear when its
/// linear slope is under 5% of the worst linear slope the same policy shows
/// on the instance AND the log fit explains it at least as well as the
/// linear fit.
inline bool is_sublinear_growth(const GrowthFit& fit, double worst_linear_slope) {
  return fit.linear_slope < 0.05 * worst_linear_slope && fit.r2_log >= fit.r2_linear;
}

inline bool is_linear_growth(const GrowthFit& fit, double worst_linear_slope) {
  return fit.linear_slope > 0.0 && !is_sublinear_growth(fit, worst_linear_slope);
}

}  // namespace iab
