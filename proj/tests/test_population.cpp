#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "iab/io.hpp"
#include "iab/population.hpp"
#include "iab/rng.hpp"

using iab::ComplianceType;
using iab::PopulationSpec;

namespace {

bool any_violation_contains(const std::vector<std::string>& violations,
                            const std::string& needle) {
  for (const std::string& v : violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

// Pearson chi-square statistic against the enumerated law; critical
// values at significance 0.001.
double chi_square_statistic(const std::map<ComplianceType, long long>& counts,
                            const std::vector<iab::TypeLaw>& law, long long n) {
  double stat = 0.0;
  long long seen = 0;
  for (const iab::TypeLaw& entry : law) {
    const auto it = counts.find(entry.type);
    const double observed =
        it == counts.end() ? 0.0 : static_cast<double>(it->second);
    seen += it == counts.end() ? 0 : it->second;
    const double expected = entry.p * static_cast<double>(n);
    stat += (observed - expected) * (observed - expected) / expected;
  }
  REQUIRE(seen == n);  // sampler never produces a type outside the law
  return stat;
}

const std::map<int, double> kChiSquareCrit001 = {
    {1, 10.827566}, {2, 13.815511}, {3, 16.266236}, {8, 26.124482}, {9, 27.877165}};

}  // namespace

TEST_CASE("compliance type identity checks") {
  CHECK(iab::complier_type(3).is_complier());
  CHECK_FALSE(ComplianceType{{0, 0, 1}}.is_complier());
  CHECK(iab::always_taker_type(3, 1).is_always_taker(1));
  CHECK_FALSE(iab::always_taker_type(3, 1).is_always_taker(0));
  CHECK_FALSE(ComplianceType{{0, 0, 1}}.is_always_taker(0));
}

TEST_CASE("builtin example 1 is self-consistent") {
  const PopulationSpec spec = iab::builtin_example1();
  CHECK(spec.arms == 3);
  CHECK(spec.psi == 0.5);  // (b-a)^2/8 with b-a = 2
  CHECK(iab::validate_population(spec).empty());
}

TEST_CASE("validation reports a bad probability sum") {
  PopulationSpec spec = iab::builtin_example1();
  spec.table[0].p = 0.9 - spec.table[1].p;  // total 0.9
  const std::vector<std::string> violations = iab::validate_population(spec);
  REQUIRE_FALSE(violations.empty());
  CHECK(any_violation_contains(violations, "probabilities sum to 0.9"));
}

TEST_CASE("validation reports out-of-range labels") {
  PopulationSpec spec = iab::builtin_example1();
  spec.table[1].type.map[0] = 3;  // label m+1 in 1-based terms
  CHECK(any_violation_contains(iab::validate_population(spec), "label out of range"));
}

TEST_CASE("validation reports psi inconsistent with the noise law") {
  PopulationSpec spec = iab::builtin_example1();
  spec.psi = 0.4;
  CHECK(any_violation_contains(iab::validate_population(spec), "psi"));
}

TEST_CASE("sample_unit rejects an invalid population") {
  PopulationSpec spec = iab::builtin_example1();
  spec.table[0].p = 0.1;
  iab::RngStream rng(1, 0);
  CHECK_THROWS_WITH(iab::sample_unit(spec, rng), "invalid population");
}

TEST_CASE("example 1 draws stay on the declared support with shared noise") {
  const PopulationSpec spec = iab::builtin_example1();
  const ComplianceType iota = iab::complier_type(3);
  const ComplianceType kappa{{0, 0, 1}};
  iab::RngStream rng(2024, 0);
  const iab::UnitSampler sampler(spec);
  for (int i = 0; i < 2000; ++i) {
    const iab::Unit unit = sampler(rng);
    REQUIRE((unit.chi == iota || unit.chi == kappa));
    // Additive model: Y(1) - Y(2) equals the conditional mean gap up to
    // one rounding of the shared draw.
    const std::vector<double>& means =
        unit.chi == iota ? spec.table[0].means : spec.table[1].means;
    REQUIRE(unit.potential_rewards[0] - unit.potential_rewards[1] ==
            Catch::Approx(means[0] - means[1]).margin(1e-14));
  }
}

TEST_CASE("builtin example 2 fields match the instance") {
  for (const iab::CoupledRecipe recipe :
       {iab::CoupledRecipe::Example2AsWritten, iab::CoupledRecipe::Example2Omega5}) {
    const PopulationSpec spec = iab::builtin_example2(recipe);
    CHECK(spec.arms == 5);
    CHECK(spec.psi == 0.5);
    CHECK(spec.coupled_means == std::vector<double>{0.9, 1.0, 1.0, 1.0, 2.0});
    CHECK(iab::validate_population(spec).empty());
  }
}

TEST_CASE("example 2 complier mass: zero as written, 3/70 with omega-5 weight") {
  const auto p_complier = [](const PopulationSpec& spec) {
    double p = 0.0;
    for (const iab::TypeLaw& entry : iab::enumerate_type_law(spec))
      if (entry.type.is_complier()) p += entry.p;
    return p;
  };
  CHECK(p_complier(iab::builtin_example2(iab::CoupledRecipe::Example2AsWritten)) == 0.0);
  // 0.8 * (3/8) * (1/7)
  CHECK(p_complier(iab::builtin_example2(iab::CoupledRecipe::Example2Omega5)) ==
        Catch::Approx(3.0 / 70).margin(1e-15));
}

TEST_CASE("example 2 tail branch frequency matches the normal tail mass") {
  const PopulationSpec spec = iab::builtin_example2(iab::CoupledRecipe::Example2Omega5);
  const iab::UnitSampler sampler(spec);
  iab::RngStream rng(7, 0);
  const long long n = 1000000;
  long long takers_one = 0;
  for (long long i = 0; i < n; ++i)
    if (sampler(rng).chi.is_always_taker(0)) ++takers_one;
  const double freq = static_cast<double>(takers_one) / static_cast<double>(n);
  CHECK(std::abs(freq - 0.1) < 0.002);  // P(eps >= -Phi^{-1}(0.1)) = 0.1
}

TEST_CASE("coupled draws satisfy the additive model pathwise") {
  for (const iab::CoupledRecipe recipe :
       {iab::CoupledRecipe::Example2AsWritten, iab::CoupledRecipe::Example2Omega5}) {
    const PopulationSpec spec = iab::builtin_example2(recipe);
    const iab::UnitSampler sampler(spec);
    iab::RngStream rng(11, 0);
    for (int i = 0; i < 5000; ++i) {
      const iab::Unit unit = sampler(rng);
      for (int x = 1; x < spec.arms; ++x) {
        const double diff = unit.potential_rewards[static_cast<std::size_t>(x)] -
                            unit.potential_rewards[0];
        const double mean_gap =
            spec.coupled_means[static_cast<std::size_t>(x)] - spec.coupled_means[0];
        REQUIRE(diff == Catch::Approx(mean_gap).margin(1e-14));
      }
    }
  }
}

TEST_CASE("sampling is deterministic in (spec, seed)") {
  const PopulationSpec spec = iab::builtin_example2(iab::CoupledRecipe::Example2Omega5);
  const iab::UnitSampler sampler(spec);
  iab::RngStream a(99, 0), b(99, 0);
  for (int i = 0; i < 1000; ++i) {
    const iab::Unit ua = sampler(a);
    const iab::Unit ub = sampler(b);
    REQUIRE(ua.chi == ub.chi);
    REQUIRE(ua.potential_rewards == ub.potential_rewards);
  }
}

TEST_CASE("empirical type frequencies pass a chi-square test at 0.001") {
  struct Case {
    PopulationSpec spec;
    std::uint64_t seed;
  };
  PopulationSpec four_types;
  four_types.arms = 3;
  four_types.kind = PopulationSpec::Kind::Table;
  four_types.noise = iab::NoiseLaw::uniform(-1, 1);
  four_types.psi = 0.5;
  four_types.table.push_back({iab::complier_type(3), 0.4, {1, 0, 0}});
  four_types.table.push_back({iab::always_taker_type(3, 0), 0.3, {0, 1, 0}});
  four_types.table.push_back({iab::always_taker_type(3, 2), 0.2, {0, 0, 1}});
  four_types.table.push_back({ComplianceType{{1, 1, 2}}, 0.1, {1, 1, 0}});

  const std::vector<Case> cases = {
      {iab::builtin_example1(), 31},
      {four_types, 32},
      {iab::builtin_example2(iab::CoupledRecipe::Example2Omega5), 33},
  };
  for (const Case& c : cases) {
    const std::vector<iab::TypeLaw> law = iab::enumerate_type_law(c.spec);
    const iab::UnitSampler sampler(c.spec);
    iab::RngStream rng(c.seed, 0);
    std::map<ComplianceType, long long> counts;
    const long long n = 100000;
    for (long long i = 0; i < n; ++i) ++counts[sampler(rng).chi];
    const int df = static_cast<int>(law.size()) - 1;
    REQUIRE(kChiSquareCrit001.count(df) == 1);
    const double stat = chi_square_statistic(counts, law, n);
    CAPTURE(df, stat);
    CHECK(stat < kChiSquareCrit001.at(df));
  }
}

TEST_CASE("table populations round-trip through JSON") {
  const PopulationSpec spec = iab::builtin_example1();
  const nlohmann::json doc = iab::population_to_json(spec);
  const PopulationSpec back = iab::population_from_json(doc);
  CHECK(back.arms == spec.arms);
  CHECK(back.psi == spec.psi);
  CHECK(back.noise == spec.noise);
  REQUIRE(back.table.size() == spec.table.size());
  for (std::size_t i = 0; i < spec.table.size(); ++i) {
    CHECK(back.table[i].type == spec.table[i].type);
    CHECK(back.table[i].p == spec.table[i].p);
    CHECK(back.table[i].means == spec.table[i].means);
  }
  CHECK(iab::validate_population(back).empty());
}

TEST_CASE("coupled recipes resolve by name") {
  const PopulationSpec spec = iab::load_population("example2-omega5");
  CHECK(spec.kind == PopulationSpec::Kind::Coupled);
  CHECK(spec.recipe == iab::CoupledRecipe::Example2Omega5);
  CHECK_THROWS(iab::load_population("no-such-population"));

  // Coupled populations serialize as their recipe name.
  const nlohmann::json doc = iab::population_to_json(spec);
  CHECK(doc == nlohmann::json{{"recipe", "example2-omega5"}});
  CHECK(iab::population_from_json(doc).recipe == iab::CoupledRecipe::Example2Omega5);
}

TEST_CASE("enumerated law sums to one and stays on support") {
  for (const iab::CoupledRecipe recipe :
       {iab::CoupledRecipe::Example2AsWritten, iab::CoupledRecipe::Example2Omega5}) {
    const std::vector<iab::TypeLaw> law =
        iab::enumerate_type_law(iab::builtin_example2(recipe));
    double sum = 0.0;
    for (const iab::TypeLaw& entry : law) {
      CHECK(entry.p > 0.0);
      sum += entry.p;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
}
