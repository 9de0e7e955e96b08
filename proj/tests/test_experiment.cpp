#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iab/bounds.hpp"
#include "iab/experiment.hpp"

using iab::ExperimentConfig;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Tag-stack check over the small SVG subset the writer emits.
bool well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag.front() == '?') continue;  // declaration
    const bool closing = tag.front() == '/';
    const bool self_closing = tag.back() == '/';
    if (closing) {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty();
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("oracle JSON uses 1-based arm labels") {
  const nlohmann::json doc =
      iab::oracle_to_json(iab::analytic_truth(iab::builtin_example1()));
  CHECK(doc["z_star_set"] == nlohmann::json::array({3}));
  CHECK(doc["x_star_set"] == nlohmann::json::array({2}));
  CHECK(doc["x_star_by_type"].contains("1,2,3"));
  CHECK(doc["x_star_by_type"]["1,2,3"] == nlohmann::json::array({1}));
  CHECK(doc["x_star_by_type"].contains("1,1,2"));
  CHECK(doc["p_complier"] == 0.625);
}

TEST_CASE("minimal config parses with defaults filled") {
  const iab::ConfigParseResult result = iab::parse_config(
      R"({"population":"example1","policies":["ucb-itt"],"T":1000,"seed":7})");
  REQUIRE(result.errors.empty());
  REQUIRE(result.config.has_value());
  const ExperimentConfig& cfg = *result.config;
  CHECK(cfg.population == "example1");
  CHECK(cfg.horizon == 1000);
  CHECK(cfg.seed == 7);
  CHECK(cfg.n_seeds == 20);
  CHECK(cfg.gamma == 20.0);
  CHECK(cfg.checkpoints.kind == iab::CheckpointSpec::Kind::Pow2);
  CHECK(cfg.alpha_mode == ExperimentConfig::AlphaMode::Literal);
}

TEST_CASE("unknown keys are reported by name") {
  const iab::ConfigParseResult result = iab::parse_config(
      R"({"population":"example1","polcies":["ucb-itt"],"T":1000,"seed":7})");
  REQUIRE_FALSE(result.config.has_value());
  bool found = false;
  for (const std::string& e : result.errors)
    if (e.find("polcies") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("malformed fields are reported with their path") {
  const iab::ConfigParseResult result = iab::parse_config(
      R"({"population":"example1","policies":["ucb-itt","nope:x=1"],"T":0,"seed":7,
          "gamma":-2,"checkpoints":"weekly"})");
  REQUIRE_FALSE(result.config.has_value());
  const auto has = [&](const std::string& needle) {
    for (const std::string& e : result.errors)
      if (e.find(needle) != std::string::npos) return true;
    return false;
  };
  CHECK(has("policies[1]"));
  CHECK(has("T:"));
  CHECK(has("gamma"));
  CHECK(has("checkpoints"));
}

TEST_CASE("literal alpha mode requires explicit alphas") {
  const iab::ConfigParseResult result = iab::parse_config(
      R"({"population":"example1","policies":["2sls-fixed"],"T":100,"seed":1})");
  REQUIRE_FALSE(result.config.has_value());
  REQUIRE_FALSE(result.errors.empty());
  CHECK(result.errors[0].find("alpha") != std::string::npos);

  const iab::ConfigParseResult ok = iab::parse_config(
      R"({"population":"example1","policies":["2sls-fixed"],"T":100,"seed":1,
          "alpha_mode":"gamma_times_thm8"})");
  CHECK(ok.config.has_value());
}

TEST_CASE("configs round-trip through render and parse") {
  iab::RngStream rng(64, 0);
  const std::vector<std::string> populations = {"example1", "example2-omega5",
                                                "example2-as-written"};
  const std::vector<std::string> policy_pool = {
      "ucb-itt", "ucb-at", "2sls-eps-decay:alpha=0.125", "2sls-fixed:alpha=0.03",
      "2sls-adaptive:gamma=12"};
  for (int trial = 0; trial < 50; ++trial) {
    ExperimentConfig cfg;
    cfg.population = populations[static_cast<std::size_t>(rng.uniform_int(3))];
    const int n_policies = 1 + rng.uniform_int(4);
    for (int i = 0; i < n_policies; ++i)
      cfg.policies.push_back(policy_pool[static_cast<std::size_t>(rng.uniform_int(5))]);
    cfg.horizon = 1 + rng.uniform_int(100000);
    cfg.seed = rng.next_u64();
    cfg.n_seeds = 1 + rng.uniform_int(40);
    const int kind = rng.uniform_int(3);
    if (kind == 1) {
      cfg.checkpoints.kind = iab::CheckpointSpec::Kind::Every;
      cfg.checkpoints.step = 1 + rng.uniform_int(1000);
    } else if (kind == 2) {
      cfg.checkpoints.kind = iab::CheckpointSpec::Kind::Explicit;
      long long t = 0;
      for (int i = 0; i < 3; ++i)
        cfg.checkpoints.explicit_ts.push_back(t += 1 + rng.uniform_int(100));
    }
    cfg.output_dir = "out-" + std::to_string(trial);
    cfg.alpha_mode = rng.uniform_int(2) == 0 ? ExperimentConfig::AlphaMode::Literal
                                             : ExperimentConfig::AlphaMode::GammaTimesThm8;
    cfg.gamma = rng.uniform(0.5, 40.0);

    const iab::ConfigParseResult back = iab::parse_config(iab::render_config(cfg).dump());
    CAPTURE(iab::render_config(cfg).dump());
    REQUIRE(back.errors.empty());
    REQUIRE(back.config.has_value());
    REQUIRE(*back.config == cfg);
  }
}

TEST_CASE("run writes one CSV per policy, a summary, and four charts") {
  const std::filesystem::path dir = fresh_dir("iab-run-files");
  ExperimentConfig cfg;
  cfg.population = "example1";
  cfg.policies = {"ucb-itt", "ucb-at"};
  cfg.horizon = 10000;
  cfg.seed = 5;
  cfg.n_seeds = 1;
  cfg.output_dir = dir.string();
  const iab::RunOutput out = iab::run_experiment(cfg);
  REQUIRE(out.files.size() == 7);  // 2 policy CSVs + summary + 4 SVGs
  for (const std::string& f : out.files) CHECK(std::filesystem::exists(f));

  // Rerun into a second directory: byte-identical outputs.
  const std::filesystem::path dir2 = fresh_dir("iab-run-files-2");
  ExperimentConfig cfg2 = cfg;
  cfg2.output_dir = dir2.string();
  const iab::RunOutput out2 = iab::run_experiment(cfg2);
  REQUIRE(out2.files.size() == out.files.size());
  for (std::size_t i = 0; i < out.files.size(); ++i)
    REQUIRE(slurp(out.files[i]) == slurp(out2.files[i]));
}

TEST_CASE("gamma_times_thm8 records the resolved alpha in the summary") {
  const std::filesystem::path dir = fresh_dir("iab-run-alpha");
  ExperimentConfig cfg;
  cfg.population = "example2-omega5";
  cfg.policies = {"2sls-fixed"};
  cfg.horizon = 64;
  cfg.seed = 3;
  cfg.n_seeds = 2;
  cfg.gamma = 20.0;
  cfg.alpha_mode = ExperimentConfig::AlphaMode::GammaTimesThm8;
  cfg.output_dir = dir.string();
  const iab::RunOutput out = iab::run_experiment(cfg);

  const double expected = 20.0 * iab::thm8_alpha_threshold(
                                     0.19421246909236051, 5, {0.9, 1, 1, 1, 2}, 0.5);
  CHECK(out.resolved_alpha == Catch::Approx(expected).epsilon(1e-9));

  const std::string summary = slurp((dir / "summary.csv").string());
  std::istringstream lines(summary);
  std::string header, first_row;
  std::getline(lines, header);
  std::getline(lines, first_row);
  CHECK(header.rfind("policy,alpha,t,", 0) == 0);
  const std::size_t comma1 = first_row.find(',');
  const std::size_t comma2 = first_row.find(',', comma1 + 1);
  const double recorded =
      std::stod(first_row.substr(comma1 + 1, comma2 - comma1 - 1));
  CHECK(recorded == out.resolved_alpha);  // 17 digits round-trip losslessly
  CHECK(recorded == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("policy CSV rows round-trip at 17 significant digits") {
  const std::filesystem::path dir = fresh_dir("iab-run-roundtrip");
  ExperimentConfig cfg;
  cfg.population = "example1";
  cfg.policies = {"ucb-itt"};
  cfg.horizon = 256;
  cfg.seed = 11;
  cfg.n_seeds = 1;
  cfg.output_dir = dir.string();
  const iab::RunOutput out = iab::run_experiment(cfg);

  iab::EpisodeConfig episode;
  episode.population = iab::builtin_example1();
  episode.policy = iab::parse_policy_spec("ucb-itt");
  episode.horizon = 256;
  episode.seed = 11;
  episode.checkpoints = iab::pow2_checkpoints(256);
  const iab::EpisodeResult expected = iab::run_episode(episode);

  std::ifstream in(out.files[0]);
  std::string header;
  std::getline(in, header);
  CHECK(header == "policy,seed,t,itt,st,lct,c,complier_rounds");
  for (const iab::RegretSnapshot& snap : expected.checkpoints) {
    std::string line;
    REQUIRE(std::getline(in, line));
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 8);
    CHECK(fields[0] == "ucb-itt");
    CHECK(std::stoll(fields[1]) == 11);
    CHECK(std::stoll(fields[2]) == snap.t);
    CHECK(std::stod(fields[3]) == snap.itt);
    CHECK(std::stod(fields[4]) == snap.st);
    CHECK(std::stod(fields[5]) == snap.lct);
    CHECK(std::stod(fields[6]) == snap.c);
    CHECK(std::stoll(fields[7]) == snap.complier_rounds);
  }
}

TEST_CASE("empty replication data still yields a header-only CSV") {
  const std::filesystem::path dir = fresh_dir("iab-empty-csv");
  const std::string path = (dir / "empty.csv").string();
  iab::write_policy_csv(path, "ucb-itt", 0, iab::ReplicationAggregate{});
  CHECK(slurp(path) == "policy,seed,t,itt,st,lct,c,complier_rounds\n");
}

TEST_CASE("SVG charts are well-formed with one polyline per policy") {
  const std::filesystem::path dir = fresh_dir("iab-svg");
  ExperimentConfig cfg;
  cfg.population = "example1";
  cfg.policies = {"ucb-itt", "ucb-at", "2sls-eps-decay:alpha=0.25"};
  cfg.horizon = 512;
  cfg.seed = 2;
  cfg.n_seeds = 2;
  cfg.output_dir = dir.string();
  (void)iab::run_experiment(cfg);
  for (const char* name : {"regret-itt.svg", "regret-st.svg", "regret-lct.svg",
                           "regret-c.svg"}) {
    const std::string text = slurp((dir / name).string());
    CAPTURE(name);
    CHECK(well_formed_xml(text));
    CHECK(count_occurrences(text, "<polyline") == 3);
    CHECK(text.find("href") == std::string::npos);  // no external assets
  }
}
