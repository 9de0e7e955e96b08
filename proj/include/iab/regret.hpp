#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "iab/oracle.hpp"
#include "iab/population.hpp"

namespace iab {

/// The benchmark arms regret is accumulated against, fixed once per
/// episode as the lowest-index members of the oracle's optimal sets (any
/// fixed choice is admissible; lowest index keeps paths reproducible).
struct RegretTargets {
  int z_star = 0;
  int x_star = 0;
  int x_star_complier = 0;
  std::map<ComplianceType, int> x_star_by_type;
};

inline RegretTargets make_targets(const OracleTruth& truth, int arms) {
  RegretTargets targets;
  targets.z_star = truth.z_star_set.front();
  targets.x_star = truth.x_star_set.front();
  targets.x_star_complier = targets.x_star;
  const ComplianceType iota = complier_type(arms);
  for (const auto& [type, set] : truth.x_star_by_type) {
    targets.x_star_by_type[type] = set.front();
    if (type == iota) targets.x_star_complier = set.front();
  }
  return targets;
}

struct RegretSnapshot {
  long long t = 0;
  double itt = 0.0;
  double st = 0.0;
  double lct = 0.0;
  double c = 0.0;
  long long complier_rounds = 0;
};

/// Cumulative counterfactual regret accounting over one episode. Reads
/// full Units, so it lives strictly on the simulator side.
class RegretTracker {
 public:
  RegretTracker(RegretTargets targets, std::vector<long long> checkpoint_ts)
      : targets_(std::move(targets)), schedule_(std::move(checkpoint_ts)) {}

  /// Folds one round into the four regrets. `realized_y` must be the
  /// reward the trajectory actually produced for (unit, z).
  void update(const Unit& unit, int z, double realized_y) {
    const double* rewards = unit.potential_rewards.data();
    if (realized_y != rewards[unit.chi(z)])
      throw std::invalid_argument("reward/trajectory mismatch");
    current_.itt += rewards[unit.chi(targets_.z_star)] - realized_y;
    current_.st += rewards[targets_.x_star] - realized_y;
    const auto it = targets_.x_star_by_type.find(unit.chi);
    if (it == targets_.x_star_by_type.end())
      throw std::invalid_argument("unit type missing from oracle targets");
    current_.lct += rewards[it->second] - realized_y;
    if (unit.chi.is_complier()) {
      current_.c += rewards[targets_.x_star_complier] - realized_y;
      ++current_.complier_rounds;
    }
    ++current_.t;
    if (next_checkpoint_ < schedule_.size() &&
        current_.t == schedule_[next_checkpoint_]) {
      checkpoints_.push_back(current_);
      ++next_checkpoint_;
    }
  }

  RegretSnapshot snapshot() const { return current_; }
  const std::vector<RegretSnapshot>& checkpoints() const { return checkpoints_; }
  const RegretTargets& targets() const { return targets_; }

 private:
  RegretTargets targets_;
  std::vector<long long> schedule_;
  std::size_t next_checkpoint_ = 0;
  RegretSnapshot current_;
  std::vector<RegretSnapshot> checkpoints_;
};

}  // namespace iab
