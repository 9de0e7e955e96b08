// Command-line front end: run experiments from JSON configs, print oracle
// truths for a population, and evaluate the theoretical bounds.
//
// Exit codes: 0 ok, 1 config/usage error, 2 runtime error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iab/bounds.hpp"
#include "iab/experiment.hpp"
#include "iab/io.hpp"
#include "iab/oracle.hpp"
#include "iab/version.hpp"

namespace {

int run_command(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config " << config_path << "\n";
    return 1;
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  iab::ConfigParseResult parsed = iab::parse_config(buffer.str());
  if (!parsed.config) {
    for (const std::string& e : parsed.errors) std::cerr << "config error: " << e << "\n";
    return 1;
  }
  try {
    iab::RunOutput output = iab::run_experiment(*parsed.config);
    for (const std::string& f : output.files) std::cout << f << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int oracle_command(const std::string& population) {
  try {
    const iab::PopulationSpec spec = iab::load_population(population);
    const std::vector<std::string> violations = iab::validate_population(spec);
    if (!violations.empty()) {
      for (const std::string& v : violations) std::cerr << "config error: " << v << "\n";
      return 1;
    }
    std::cout << iab::oracle_to_json(iab::analytic_truth(spec)).dump(2) << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

struct BoundFlags {
  int m = 0;
  std::vector<double> n_z;
  std::vector<double> mu;
  double eps = 0.0;
  double sigma_min = 0.0;
  double psi = 0.0;
  double xi = 0.0;
  double alpha = 0.0;
  double p_complier = 0.0;
};

int bounds_command(const std::string& name, const BoundFlags& flags) {
  try {
    double value = 0.0;
    if (name == "lemma1")
      value = iab::lemma1_bound(flags.m, flags.n_z, flags.eps);
    else if (name == "lemma2")
      value = iab::lemma2_bound(flags.m, flags.n_z, flags.sigma_min, flags.xi);
    else if (name == "lemma3")
      value = iab::lemma3_bound(flags.n_z.empty() ? 0.0 : flags.n_z.front(), flags.eps,
                                flags.psi);
    else if (name == "lemma4")
      value = iab::lemma4_bound(flags.m, flags.n_z, flags.sigma_min, flags.psi, flags.eps);
    else if (name == "thm7-alpha")
      value = iab::thm7_alpha_threshold(flags.sigma_min, flags.m, flags.mu, flags.psi);
    else if (name == "thm8-alpha")
      value = iab::thm8_alpha_threshold(flags.sigma_min, flags.m, flags.mu, flags.psi);
    else if (name == "cregret-log-coefficient")
      value = iab::regret_bound_log_coefficient(flags.p_complier, flags.mu, flags.alpha);
    else {
      std::cerr << "config error: unknown bound \"" << name << "\"\n";
      return 1;
    }
    nlohmann::json doc{{"name", name}, {"value", value}};
    std::cout << doc.dump(2) << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instrument-armed bandit simulator"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "Path to the experiment config")->required();

  std::string population;
  CLI::App* oracle =
      app.add_subcommand("oracle", "Print ground-truth quantities for a population");
  oracle->add_option("population", population, "Builtin name or population JSON path")
      ->required();

  std::string bound_name;
  BoundFlags flags;
  CLI::App* bounds = app.add_subcommand("bounds", "Evaluate a theoretical bound");
  bounds->add_option("name", bound_name,
                     "lemma1|lemma2|lemma3|lemma4|thm7-alpha|thm8-alpha|"
                     "cregret-log-coefficient")
      ->required();
  bounds->add_option("--m", flags.m, "number of arms");
  bounds->add_option("--n", flags.n_z, "per-arm pull counts")->delimiter(',');
  bounds->add_option("--mu", flags.mu, "treatment means")->delimiter(',');
  bounds->add_option("--eps", flags.eps, "deviation epsilon");
  bounds->add_option("--sigma-min", flags.sigma_min, "smallest singular value of P");
  bounds->add_option("--psi", flags.psi, "subgaussian parameter");
  bounds->add_option("--xi", flags.xi, "relative deviation in (0,1)");
  bounds->add_option("--alpha", flags.alpha, "exploration rate");
  bounds->add_option("--p-complier", flags.p_complier, "complier probability");

  CLI::App* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (run->parsed()) return run_command(config_path);
  if (oracle->parsed()) return oracle_command(population);
  if (bounds->parsed()) return bounds_command(bound_name, flags);
  if (version->parsed()) {
    std::cout << "iab " << iab::kVersion << "\n";
    return 0;
  }
  return 1;
}
