#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iab/rng.hpp"

namespace iab {

/// Potential-treatment map of one experimental unit: entry z holds the
/// treatment actually taken when instrument z is pulled. Arms are 0-based
/// in memory; the JSON interchange format uses 1-based labels.
struct ComplianceType {
  std::vector<int> map;

  int operator()(int z) const { return map[static_cast<std::size_t>(z)]; }
  int arms() const { return static_cast<int>(map.size()); }

  bool is_complier() const {
    for (int z = 0; z < arms(); ++z)
      if (map[static_cast<std::size_t>(z)] != z) return false;
    return true;
  }

  bool is_always_taker(int treatment) const {
    for (int entry : map)
      if (entry != treatment) return false;
    return true;
  }

  auto operator<=>(const ComplianceType&) const = default;
};

inline ComplianceType complier_type(int m) {
  ComplianceType chi;
  chi.map.resize(static_cast<std::size_t>(m));
  std::iota(chi.map.begin(), chi.map.end(), 0);
  return chi;
}

inline ComplianceType always_taker_type(int m, int treatment) {
  ComplianceType chi;
  chi.map.assign(static_cast<std::size_t>(m), treatment);
  return chi;
}

struct NoiseLaw {
  enum class Kind { Uniform, Normal };
  Kind kind = Kind::Uniform;
  double lo = 0.0;
  double hi = 0.0;
  double variance = 0.0;

  static NoiseLaw uniform(double a, double b) {
    NoiseLaw law;
    law.kind = Kind::Uniform;
    law.lo = a;
    law.hi = b;
    return law;
  }

  static NoiseLaw normal(double var) {
    NoiseLaw law;
    law.kind = Kind::Normal;
    law.variance = var;
    return law;
  }

  double sample(RngStream& rng) const {
    if (kind == Kind::Uniform) return rng.uniform(lo, hi);
    return std::sqrt(variance) * rng.normal();
  }

  /// Subgaussian parameter implied by the law: (b-a)^2/8 for Uniform(a,b)
  /// (Hoeffding), half the variance for Normal.
  double implied_psi() const {
    if (kind == Kind::Uniform) return (hi - lo) * (hi - lo) / 8.0;
    return variance / 2.0;
  }

  auto operator<=>(const NoiseLaw&) const = default;
};

struct TableEntry {
  ComplianceType type;
  double p = 0.0;
  std::vector<double> means;  // conditional mean reward of each treatment
};

enum class CoupledRecipe { Example2AsWritten, Example2Omega5 };

inline std::string recipe_name(CoupledRecipe recipe) {
  switch (recipe) {
    case CoupledRecipe::Example2AsWritten:
      return "example2-as-written";
    case CoupledRecipe::Example2Omega5:
      return "example2-omega5";
  }
  return "unknown";
}

inline std::optional<CoupledRecipe> recipe_from_name(const std::string& name) {
  if (name == "example2-as-written") return CoupledRecipe::Example2AsWritten;
  if (name == "example2-omega5") return CoupledRecipe::Example2Omega5;
  return std::nullopt;
}

/// Hidden parameter of an instance: the distribution of units. Either a
/// finite table of (compliance type, probability, conditional means) with
/// an additive noise law shared by all potential rewards, or a named
/// coupled recipe where the compliance type is a function of the noise.
struct PopulationSpec {
  enum class Kind { Table, Coupled };

  int arms = 0;
  Kind kind = Kind::Table;
  double psi = 0.0;

  // Table populations.
  std::vector<TableEntry> table;
  NoiseLaw noise;

  // Coupled populations.
  CoupledRecipe recipe = CoupledRecipe::Example2AsWritten;
  std::vector<double> coupled_means;
};

/// One round's draw: the unit's compliance vector and all m potential
/// rewards. Only Y(chi(Z)) and chi(Z) ever reach a policy.
struct Unit {
  ComplianceType chi;
  std::vector<double> potential_rewards;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

/// Returns every invariant violation of the spec; empty means valid.
inline std::vector<std::string> validate_population(const PopulationSpec& spec) {
  std::vector<std::string> violations;
  if (spec.arms < 2) violations.push_back("arms must be at least 2");
  if (spec.kind == PopulationSpec::Kind::Table) {
    if (spec.table.empty()) violations.push_back("type table is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < spec.table.size(); ++i) {
      const TableEntry& entry = spec.table[i];
      if (entry.p < 0.0)
        violations.push_back("type " + std::to_string(i) + " has negative probability");
      sum += entry.p;
      if (entry.type.arms() != spec.arms)
        violations.push_back("type " + std::to_string(i) + " map length differs from arms");
      for (int label : entry.type.map)
        if (label < 0 || label >= spec.arms) {
          violations.push_back("type " + std::to_string(i) + " label out of range");
          break;
        }
      if (static_cast<int>(entry.means.size()) != spec.arms)
        violations.push_back("type " + std::to_string(i) + " means length differs from arms");
    }
    if (!spec.table.empty() && std::abs(sum - 1.0) > 1e-12)
      violations.push_back("probabilities sum to " + detail::fmt(sum));
    if (std::abs(spec.psi - spec.noise.implied_psi()) > 1e-12)
      violations.push_back("psi " + detail::fmt(spec.psi) + " inconsistent with noise law (expected " +
                           detail::fmt(spec.noise.implied_psi()) + ")");
  } else {
    if (static_cast<int>(spec.coupled_means.size()) != spec.arms)
      violations.push_back("coupled means length differs from arms");
    if (std::abs(spec.psi - 0.5) > 1e-12)
      violations.push_back("psi " + detail::fmt(spec.psi) +
                           " inconsistent with the recipe's unit-variance normal noise");
  }
  return violations;
}

namespace detail {

// epsilon >= this threshold sends an Example 2 unit to the 1-always-taker
// branch; epsilon <= -threshold to the 5-always-taker branch.
inline double example2_tail_threshold() {
  static const double value = inverse_normal_cdf(0.9);
  return value;
}

inline const std::vector<double>& example2_omega_weights(CoupledRecipe recipe) {
  static const std::vector<double> as_written = {1.0 / 7, 2.0 / 7, 2.0 / 7, 2.0 / 7, 0.0};
  static const std::vector<double> omega5 = {0.0, 2.0 / 7, 2.0 / 7, 2.0 / 7, 1.0 / 7};
  return recipe == CoupledRecipe::Example2AsWritten ? as_written : omega5;
}

}  // namespace detail

/// Draws units from a validated spec. Construct once per episode; the
/// constructor rejects invalid specs, so the per-draw path stays cheap.
class UnitSampler {
 public:
  explicit UnitSampler(const PopulationSpec& spec) : spec_(&spec) {
    if (!validate_population(spec).empty())
      throw std::invalid_argument("invalid population");
    if (spec.kind == PopulationSpec::Kind::Table) {
      type_probs_.reserve(spec.table.size());
      for (const TableEntry& entry : spec.table) type_probs_.push_back(entry.p);
    }
  }

  Unit operator()(RngStream& rng) const {
    const PopulationSpec& spec = *spec_;
    Unit unit;
    if (spec.kind == PopulationSpec::Kind::Table) {
      const TableEntry& entry =
          spec.table[static_cast<std::size_t>(rng.categorical(type_probs_))];
      const double eps = spec.noise.sample(rng);
      unit.chi = entry.type;
      unit.potential_rewards.resize(static_cast<std::size_t>(spec.arms));
      for (int x = 0; x < spec.arms; ++x)
        unit.potential_rewards[static_cast<std::size_t>(x)] =
            entry.means[static_cast<std::size_t>(x)] + eps;
      return unit;
    }

    const double eps = rng.normal();
    const double tail = detail::example2_tail_threshold();
    const int m = spec.arms;
    if (eps >= tail) {
      unit.chi = always_taker_type(m, 0);
    } else if (eps <= -tail) {
      unit.chi = always_taker_type(m, m - 1);
    } else {
      const double branch = rng.next_double();
      if (branch < 1.0 / 8) {
        unit.chi = always_taker_type(m, m - 1);
      } else {
        const std::vector<double>& weights = detail::example2_omega_weights(spec.recipe);
        const int omega = rng.categorical(weights);
        if (branch < 1.0 / 8 + 3.0 / 8) {
          unit.chi = complier_type(m);
          unit.chi.map.back() = omega;
        } else {
          unit.chi = always_taker_type(m, m - 1);
          unit.chi.map.back() = omega;
        }
      }
    }
    unit.potential_rewards.resize(static_cast<std::size_t>(m));
    for (int x = 0; x < m; ++x)
      unit.potential_rewards[static_cast<std::size_t>(x)] =
          spec.coupled_means[static_cast<std::size_t>(x)] + eps;
    return unit;
  }

 private:
  const PopulationSpec* spec_;
  std::vector<double> type_probs_;
};

/// Single-draw convenience wrapper; validates on every call, so hot loops
/// should hold a UnitSampler instead.
inline Unit sample_unit(const PopulationSpec& spec, RngStream& rng) {
  return UnitSampler(spec)(rng);
}

/// m = 3 instance with compliers (5/8) and (1,1,2)-takers (3/8),
/// conditional means (1,-1,0) and (-4,0,-2), Uniform(-1,1) noise.
inline PopulationSpec builtin_example1() {
  PopulationSpec spec;
  spec.arms = 3;
  spec.kind = PopulationSpec::Kind::Table;
  spec.noise = NoiseLaw::uniform(-1.0, 1.0);
  spec.psi = 0.5;
  spec.table.push_back({complier_type(3), 5.0 / 8, {1.0, -1.0, 0.0}});
  spec.table.push_back({ComplianceType{{0, 0, 1}}, 3.0 / 8, {-4.0, 0.0, -2.0}});
  return spec;
}

/// m = 5 homogeneous instance where compliance is coupled to the additive
/// standard-normal noise. The two recipes differ only in the omega weight
/// vector: example2-as-written uses (1/7,2/7,2/7,2/7,0) and has no exact
/// compliers; example2-omega5 uses (0,2/7,2/7,2/7,1/7).
inline PopulationSpec builtin_example2(CoupledRecipe recipe) {
  PopulationSpec spec;
  spec.arms = 5;
  spec.kind = PopulationSpec::Kind::Coupled;
  spec.recipe = recipe;
  spec.coupled_means = {0.9, 1.0, 1.0, 1.0, 2.0};
  spec.noise = NoiseLaw::normal(1.0);
  spec.psi = 0.5;
  return spec;
}

/// Finite description of a population: the support of the compliance-type
/// distribution together with per-type conditional treatment means. For
/// coupled recipes the marginal means stand in for the conditional ones;
/// every quantity derived from the law (mu, mu_tilde, P, argmax sets,
/// p_complier) is unaffected because the coupling enters additively.
struct TypeLaw {
  ComplianceType type;
  double p = 0.0;
  std::vector<double> means;
};

inline std::vector<TypeLaw> enumerate_type_law(const PopulationSpec& spec) {
  std::vector<TypeLaw> law;
  if (spec.kind == PopulationSpec::Kind::Table) {
    for (const TableEntry& entry : spec.table)
      if (entry.p > 0.0) law.push_back({entry.type, entry.p, entry.means});
    return law;
  }
  if (spec.recipe != CoupledRecipe::Example2AsWritten &&
      spec.recipe != CoupledRecipe::Example2Omega5)
    throw std::runtime_error("analytic truth unavailable; use mc_truth");

  const int m = spec.arms;
  std::map<ComplianceType, double> probs;
  probs[always_taker_type(m, 0)] += 0.1;
  probs[always_taker_type(m, m - 1)] += 0.1 + 0.8 / 8.0;
  const std::vector<double>& weights = detail::example2_omega_weights(spec.recipe);
  for (int omega = 0; omega < m; ++omega) {
    if (weights[static_cast<std::size_t>(omega)] == 0.0) continue;
    ComplianceType partial = complier_type(m);
    partial.map.back() = omega;
    probs[partial] += 0.8 * (3.0 / 8) * weights[static_cast<std::size_t>(omega)];
    ComplianceType taker = always_taker_type(m, m - 1);
    taker.map.back() = omega;
    probs[taker] += 0.8 * (1.0 / 2) * weights[static_cast<std::size_t>(omega)];
  }
  for (const auto& [type, p] : probs) law.push_back({type, p, spec.coupled_means});
  return law;
}

}  // namespace iab
