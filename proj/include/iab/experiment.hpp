#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "iab/bounds.hpp"
#include "iab/io.hpp"
#include "iab/simulator.hpp"
#include "json.hpp"

namespace iab {

struct CheckpointSpec {
  enum class Kind { Pow2, Every, Explicit };
  Kind kind = Kind::Pow2;
  long long step = 0;
  std::vector<long long> explicit_ts;

  bool operator==(const CheckpointSpec&) const = default;

  std::vector<long long> resolve(long long horizon) const {
    switch (kind) {
      case Kind::Pow2:
        return pow2_checkpoints(horizon);
      case Kind::Every:
        return every_checkpoints(step, horizon);
      case Kind::Explicit: {
        std::vector<long long> ts = explicit_ts;
        if (ts.empty() || ts.back() != horizon) ts.push_back(horizon);
        return ts;
      }
    }
    return {};
  }
};

/// One experiment: a population, a list of policies, and replication
/// parameters. `alpha_mode` "gamma_times_thm8" fills in alpha = gamma *
/// (fixed-schedule threshold) for 2SLS policies that do not carry an
/// explicit alpha, mirroring the gamma*alpha_star configuration pattern.
struct ExperimentConfig {
  std::string population;
  std::vector<std::string> policies;
  long long horizon = 0;
  std::uint64_t seed = 0;
  int n_seeds = 20;
  CheckpointSpec checkpoints;
  std::string output_dir = "iab-out";
  enum class AlphaMode { Literal, GammaTimesThm8 } alpha_mode = AlphaMode::Literal;
  double gamma = 20.0;

  bool operator==(const ExperimentConfig&) const = default;
};

struct ConfigParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
};

/// Strict parse: unknown keys are errors, every malformed field is
/// reported with its path and reason.
inline ConfigParseResult parse_config(const std::string& text) {
  ConfigParseResult result;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    result.errors.push_back(std::string("config: not valid JSON: ") + e.what());
    return result;
  }
  if (!doc.is_object()) {
    result.errors.push_back("config: top level must be an object");
    return result;
  }

  ExperimentConfig cfg;
  std::vector<std::string>& errors = result.errors;

  static const std::vector<std::string> known = {
      "population", "policies", "T",          "seed", "n_seeds",
      "checkpoints", "output_dir", "alpha_mode", "gamma"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      errors.push_back("unknown key \"" + key + "\"");
  }

  if (!doc.contains("population") || !doc["population"].is_string())
    errors.push_back("population: required string");
  else
    cfg.population = doc["population"].get<std::string>();

  if (!doc.contains("policies") || !doc["policies"].is_array() || doc["policies"].empty()) {
    errors.push_back("policies: required non-empty array of strings");
  } else {
    for (std::size_t i = 0; i < doc["policies"].size(); ++i) {
      const nlohmann::json& item = doc["policies"][i];
      if (!item.is_string()) {
        errors.push_back("policies[" + std::to_string(i) + "]: must be a string");
        continue;
      }
      const std::string text_item = item.get<std::string>();
      try {
        (void)parse_policy_spec(text_item);
      } catch (const std::invalid_argument& e) {
        errors.push_back("policies[" + std::to_string(i) + "]: " + e.what());
        continue;
      }
      cfg.policies.push_back(text_item);
    }
  }

  if (!doc.contains("T") || !doc["T"].is_number_integer() || doc["T"].get<long long>() < 1)
    errors.push_back("T: required integer >= 1");
  else
    cfg.horizon = doc["T"].get<long long>();

  if (!doc.contains("seed") || !doc["seed"].is_number_unsigned())
    errors.push_back("seed: required unsigned integer");
  else
    cfg.seed = doc["seed"].get<std::uint64_t>();

  if (doc.contains("n_seeds")) {
    if (!doc["n_seeds"].is_number_integer() || doc["n_seeds"].get<int>() < 1)
      errors.push_back("n_seeds: must be an integer >= 1");
    else
      cfg.n_seeds = doc["n_seeds"].get<int>();
  }

  if (doc.contains("checkpoints")) {
    const nlohmann::json& cp = doc["checkpoints"];
    if (cp.is_string() && cp.get<std::string>() == "pow2") {
      cfg.checkpoints.kind = CheckpointSpec::Kind::Pow2;
    } else if (cp.is_object() && cp.contains("every") && cp.size() == 1 &&
               cp["every"].is_number_integer() && cp["every"].get<long long>() >= 1) {
      cfg.checkpoints.kind = CheckpointSpec::Kind::Every;
      cfg.checkpoints.step = cp["every"].get<long long>();
    } else if (cp.is_array() && !cp.empty()) {
      cfg.checkpoints.kind = CheckpointSpec::Kind::Explicit;
      bool ok = true;
      for (const nlohmann::json& t : cp) {
        if (!t.is_number_integer() || t.get<long long>() < 1) {
          ok = false;
          break;
        }
        cfg.checkpoints.explicit_ts.push_back(t.get<long long>());
      }
      if (!ok) errors.push_back("checkpoints: explicit list must hold integers >= 1");
    } else {
      errors.push_back("checkpoints: expected \"pow2\", {\"every\": N}, or a list");
    }
  }

  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string())
      errors.push_back("output_dir: must be a string");
    else
      cfg.output_dir = doc["output_dir"].get<std::string>();
  }

  if (doc.contains("alpha_mode")) {
    const std::string mode =
        doc["alpha_mode"].is_string() ? doc["alpha_mode"].get<std::string>() : "";
    if (mode == "literal")
      cfg.alpha_mode = ExperimentConfig::AlphaMode::Literal;
    else if (mode == "gamma_times_thm8")
      cfg.alpha_mode = ExperimentConfig::AlphaMode::GammaTimesThm8;
    else
      errors.push_back("alpha_mode: expected \"literal\" or \"gamma_times_thm8\"");
  }

  if (doc.contains("gamma")) {
    if (!doc["gamma"].is_number() || doc["gamma"].get<double>() <= 0.0)
      errors.push_back("gamma: must be a positive number");
    else
      cfg.gamma = doc["gamma"].get<double>();
  }

  // In literal mode the 2SLS policies must carry their own alpha.
  if (errors.empty() && cfg.alpha_mode == ExperimentConfig::AlphaMode::Literal) {
    for (std::size_t i = 0; i < cfg.policies.size(); ++i) {
      const PolicySpec spec = parse_policy_spec(cfg.policies[i]);
      if ((spec.kind == PolicyKind::EpsDecay || spec.kind == PolicyKind::FixedSchedule) &&
          !spec.alpha)
        errors.push_back("policies[" + std::to_string(i) +
                         "]: alpha required in literal alpha_mode");
    }
  }

  if (errors.empty()) result.config = std::move(cfg);
  return result;
}

inline nlohmann::json render_config(const ExperimentConfig& cfg) {
  nlohmann::json doc;
  doc["population"] = cfg.population;
  doc["policies"] = cfg.policies;
  doc["T"] = cfg.horizon;
  doc["seed"] = cfg.seed;
  doc["n_seeds"] = cfg.n_seeds;
  switch (cfg.checkpoints.kind) {
    case CheckpointSpec::Kind::Pow2:
      doc["checkpoints"] = "pow2";
      break;
    case CheckpointSpec::Kind::Every:
      doc["checkpoints"] = {{"every", cfg.checkpoints.step}};
      break;
    case CheckpointSpec::Kind::Explicit:
      doc["checkpoints"] = cfg.checkpoints.explicit_ts;
      break;
  }
  doc["output_dir"] = cfg.output_dir;
  doc["alpha_mode"] = cfg.alpha_mode == ExperimentConfig::AlphaMode::Literal
                          ? "literal"
                          : "gamma_times_thm8";
  doc["gamma"] = cfg.gamma;
  return doc;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sanitize_filename(const std::string& label) {
  std::string out;
  for (char c : label)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '-';
  return out;
}

}  // namespace detail

/// Per-seed checkpoint rows for one policy. Floats carry 17 significant
/// digits so that 64-bit values round-trip losslessly.
inline void write_policy_csv(const std::string& path, const std::string& policy_label,
                             std::uint64_t base_seed, const ReplicationAggregate& agg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "policy,seed,t,itt,st,lct,c,complier_rounds\n";
  for (std::size_t s = 0; s < agg.per_seed.size(); ++s) {
    for (const RegretSnapshot& snap : agg.per_seed[s].checkpoints) {
      out << policy_label << ',' << base_seed + s << ',' << snap.t << ','
          << detail::format_double(snap.itt) << ',' << detail::format_double(snap.st)
          << ',' << detail::format_double(snap.lct) << ',' << detail::format_double(snap.c)
          << ',' << snap.complier_rounds << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

struct SvgSeries {
  std::string label;
  std::vector<long long> ts;
  std::vector<double> values;
};

/// Minimal standalone SVG line chart: linear axes, one polyline per
/// series, inline legend, no external assets.
inline void write_svg(const std::string& path, const std::string& title,
                      const std::vector<SvgSeries>& series) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const double width = 860, height = 520;
  const double left = 70, right = width - 210, top = 50, bottom = height - 60;

  double t_max = 1.0, v_min = 0.0, v_max = 0.0;
  for (const SvgSeries& s : series) {
    for (long long t : s.ts) t_max = std::max(t_max, static_cast<double>(t));
    for (double v : s.values) {
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
  }
  if (v_max == v_min) v_max = v_min + 1.0;

  const auto sx = [&](double t) { return left + (right - left) * t / t_max; };
  const auto sy = [&](double v) {
    return bottom - (bottom - top) * (v - v_min) / (v_max - v_min);
  };
  const auto coord = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  const auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '&')
        out += "&amp;";
      else if (c == '<')
        out += "&lt;";
      else if (c == '>')
        out += "&gt;";
      else
        out += c;
    }
    return out;
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "  <text x=\"" << (left + right) / 2 << "\" y=\"28\" font-size=\"16\" "
         "text-anchor=\"middle\" font-family=\"sans-serif\">"
      << escape(title) << "</text>\n";
  out << "  <line x1=\"" << coord(left) << "\" y1=\"" << coord(bottom) << "\" x2=\""
      << coord(right) << "\" y2=\"" << coord(bottom)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "  <line x1=\"" << coord(left) << "\" y1=\"" << coord(top) << "\" x2=\""
      << coord(left) << "\" y2=\"" << coord(bottom)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", t_max);
  out << "  <text x=\"" << coord(right) << "\" y=\"" << coord(bottom + 18)
      << "\" font-size=\"12\" text-anchor=\"end\" font-family=\"sans-serif\">t=" << buf
      << "</text>\n";
  out << "  <text x=\"" << coord(left) << "\" y=\"" << coord(bottom + 18)
      << "\" font-size=\"12\" font-family=\"sans-serif\">0</text>\n";
  std::snprintf(buf, sizeof(buf), "%g", v_max);
  out << "  <text x=\"" << coord(left - 8) << "\" y=\"" << coord(top + 4)
      << "\" font-size=\"12\" text-anchor=\"end\" font-family=\"sans-serif\">" << buf
      << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%g", v_min);
  out << "  <text x=\"" << coord(left - 8) << "\" y=\"" << coord(bottom + 4)
      << "\" font-size=\"12\" text-anchor=\"end\" font-family=\"sans-serif\">" << buf
      << "</text>\n";
  if (v_min < 0.0 && v_max > 0.0)
    out << "  <line x1=\"" << coord(left) << "\" y1=\"" << coord(sy(0.0)) << "\" x2=\""
        << coord(right) << "\" y2=\"" << coord(sy(0.0))
        << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const SvgSeries& s = series[i];
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.ts.size(); ++k) {
      if (k > 0) out << ' ';
      out << coord(sx(static_cast<double>(s.ts[k]))) << ',' << coord(sy(s.values[k]));
    }
    out << "\"/>\n";
    const double ly = top + 18.0 * static_cast<double>(i);
    out << "  <line x1=\"" << coord(right + 12) << "\" y1=\"" << coord(ly) << "\" x2=\""
        << coord(right + 34) << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "  <text x=\"" << coord(right + 40) << "\" y=\"" << coord(ly + 4)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << escape(s.label)
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

struct RunOutput {
  std::vector<std::string> files;
  double resolved_alpha = std::numeric_limits<double>::quiet_NaN();
};

/// Runs every policy of the experiment, writes one CSV per policy, a
/// combined summary CSV, and one SVG per regret kind overlaying all
/// policies (medians across seeds).
inline RunOutput run_experiment(const ExperimentConfig& cfg) {
  const PopulationSpec population = load_population(cfg.population);
  {
    const std::vector<std::string> violations = validate_population(population);
    if (!violations.empty()) {
      std::string joined = "invalid population:";
      for (const std::string& v : violations) joined += " [" + v + "]";
      throw std::invalid_argument(joined);
    }
  }

  RunOutput output;
  std::vector<PolicySpec> specs;
  for (const std::string& text : cfg.policies) specs.push_back(parse_policy_spec(text));

  if (cfg.alpha_mode == ExperimentConfig::AlphaMode::GammaTimesThm8) {
    const OracleTruth truth = analytic_truth(population);
    const std::vector<double> mu(truth.mu.data(), truth.mu.data() + truth.mu.size());
    const double alpha_star =
        thm8_alpha_threshold(truth.sigma_min, population.arms, mu, population.psi);
    output.resolved_alpha = cfg.gamma * alpha_star;
    for (PolicySpec& spec : specs) {
      if ((spec.kind == PolicyKind::EpsDecay || spec.kind == PolicyKind::FixedSchedule) &&
          !spec.alpha)
        spec.alpha = output.resolved_alpha;
      if (spec.kind == PolicyKind::Adaptive && !spec.gamma) spec.gamma = cfg.gamma;
    }
  }
  for (const PolicySpec& spec : specs) {
    if ((spec.kind == PolicyKind::EpsDecay || spec.kind == PolicyKind::FixedSchedule) &&
        !spec.alpha)
      throw std::invalid_argument("policy " + policy_label(spec) +
                                  " needs alpha (set alpha_mode or pass alpha=)");
  }

  std::filesystem::create_directories(cfg.output_dir);

  std::vector<ReplicationAggregate> aggregates;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    PolicySpec spec = specs[i];
    if (spec.kind == PolicyKind::Adaptive && !spec.gamma) spec.gamma = cfg.gamma;
    EpisodeConfig episode;
    episode.population = population;
    episode.policy = spec;
    episode.horizon = cfg.horizon;
    episode.seed = cfg.seed;
    episode.checkpoints = cfg.checkpoints.resolve(cfg.horizon);
    ReplicationAggregate agg = run_replications(episode, cfg.n_seeds);
    const std::string label = policy_label(spec);
    const std::string filename = "policy-" + std::to_string(i + 1) + "-" +
                                 detail::sanitize_filename(label) + ".csv";
    const std::string path = (std::filesystem::path(cfg.output_dir) / filename).string();
    write_policy_csv(path, label, cfg.seed, agg);
    output.files.push_back(path);
    aggregates.push_back(std::move(agg));
    labels.push_back(label);
  }

  // Combined summary: per-policy aggregates at every checkpoint, plus the
  // alpha each 2SLS policy actually ran with.
  {
    const std::string path =
        (std::filesystem::path(cfg.output_dir) / "summary.csv").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "policy,alpha,t,itt_mean,itt_median,itt_se,st_mean,st_median,st_se,"
           "lct_mean,lct_median,lct_se,c_mean,c_median,c_se,complier_rounds_median\n";
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
      std::string alpha_field;
      PolicySpec spec = specs[i];
      if ((spec.kind == PolicyKind::EpsDecay || spec.kind == PolicyKind::FixedSchedule) &&
          spec.alpha)
        alpha_field = detail::format_double(*spec.alpha);
      for (const ReplicationAggregate::Row& row : aggregates[i].rows) {
        out << labels[i] << ',' << alpha_field << ',' << row.t;
        for (int k = 0; k < 4; ++k)
          out << ',' << detail::format_double(row.mean[static_cast<std::size_t>(k)]) << ','
              << detail::format_double(row.median[static_cast<std::size_t>(k)]) << ','
              << detail::format_double(row.se[static_cast<std::size_t>(k)]);
        out << ',' << detail::format_double(row.complier_rounds_median) << '\n';
      }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
    output.files.push_back(path);
  }

  static const struct {
    RegretKind kind;
    const char* name;
    const char* title;
  } kCharts[] = {
      {RegretKind::Itt, "regret-itt.svg", "ITT regret (median across seeds)"},
      {RegretKind::St, "regret-st.svg", "Static treatment regret (median across seeds)"},
      {RegretKind::Lct, "regret-lct.svg", "Latent-class treatment regret (median across seeds)"},
      {RegretKind::C, "regret-c.svg", "Compliers' regret (median across seeds)"},
  };
  for (const auto& chart : kCharts) {
    std::vector<SvgSeries> series;
    for (std::size_t i = 0; i < aggregates.size(); ++i)
      series.push_back(SvgSeries{labels[i], aggregates[i].checkpoint_ts(),
                                 aggregates[i].median_curve(chart.kind)});
    const std::string path =
        (std::filesystem::path(cfg.output_dir) / chart.name).string();
    write_svg(path, chart.title, series);
    output.files.push_back(path);
  }
  return output;
}

}  // namespace iab
