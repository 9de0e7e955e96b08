#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "iab/oracle.hpp"
#include "iab/population.hpp"
#include "json.hpp"

namespace iab {

/// Table populations serialize to JSON with 1-based arm labels in the
/// compliance maps. Coupled populations are referenced by recipe name.
inline nlohmann::json population_to_json(const PopulationSpec& spec) {
  if (spec.kind != PopulationSpec::Kind::Table)
    return nlohmann::json{{"recipe", recipe_name(spec.recipe)}};
  nlohmann::json doc;
  doc["arms"] = spec.arms;
  doc["psi"] = spec.psi;
  if (spec.noise.kind == NoiseLaw::Kind::Uniform)
    doc["noise"] = {{"kind", "uniform"}, {"a", spec.noise.lo}, {"b", spec.noise.hi}};
  else
    doc["noise"] = {{"kind", "normal"}, {"variance", spec.noise.variance}};
  doc["types"] = nlohmann::json::array();
  for (const TableEntry& entry : spec.table) {
    nlohmann::json row;
    row["map"] = nlohmann::json::array();
    for (int label : entry.type.map) row["map"].push_back(label + 1);
    row["p"] = entry.p;
    row["means"] = entry.means;
    doc["types"].push_back(row);
  }
  return doc;
}

inline PopulationSpec population_from_json(const nlohmann::json& doc) {
  PopulationSpec spec;
  if (doc.contains("recipe")) {
    const std::string name = doc.at("recipe").get<std::string>();
    std::optional<CoupledRecipe> recipe = recipe_from_name(name);
    if (!recipe) throw std::invalid_argument("unknown coupled recipe \"" + name + "\"");
    return builtin_example2(*recipe);
  }
  spec.kind = PopulationSpec::Kind::Table;
  spec.arms = doc.at("arms").get<int>();
  spec.psi = doc.at("psi").get<double>();
  const nlohmann::json& noise = doc.at("noise");
  const std::string kind = noise.at("kind").get<std::string>();
  if (kind == "uniform")
    spec.noise = NoiseLaw::uniform(noise.at("a").get<double>(), noise.at("b").get<double>());
  else if (kind == "normal")
    spec.noise = NoiseLaw::normal(noise.at("variance").get<double>());
  else
    throw std::invalid_argument("unknown noise kind \"" + kind + "\"");
  for (const nlohmann::json& row : doc.at("types")) {
    TableEntry entry;
    for (const nlohmann::json& label : row.at("map"))
      entry.type.map.push_back(label.get<int>() - 1);
    entry.p = row.at("p").get<double>();
    entry.means = row.at("means").get<std::vector<double>>();
    spec.table.push_back(std::move(entry));
  }
  return spec;
}

/// Resolves a builtin population name ("example1", "example2-as-written",
/// "example2-omega5") or loads a population JSON file.
inline PopulationSpec load_population(const std::string& name_or_path) {
  if (name_or_path == "example1") return builtin_example1();
  if (std::optional<CoupledRecipe> recipe = recipe_from_name(name_or_path))
    return builtin_example2(*recipe);
  std::ifstream in(name_or_path);
  if (!in)
    throw std::invalid_argument("unknown population \"" + name_or_path +
                                "\" (not a builtin name or readable file)");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("cannot parse population file " + name_or_path + ": " +
                                e.what());
  }
  return population_from_json(doc);
}

namespace detail {

inline std::string type_key(const ComplianceType& type) {
  std::ostringstream out;
  for (std::size_t i = 0; i < type.map.size(); ++i) {
    if (i > 0) out << ',';
    out << type.map[i] + 1;
  }
  return out.str();
}

}  // namespace detail

/// OracleTruth rendered with 1-based arm labels.
inline nlohmann::json oracle_to_json(const OracleTruth& truth) {
  nlohmann::json doc;
  doc["mu"] = std::vector<double>(truth.mu.data(), truth.mu.data() + truth.mu.size());
  doc["mu_tilde"] = std::vector<double>(truth.mu_tilde.data(),
                                        truth.mu_tilde.data() + truth.mu_tilde.size());
  doc["P"] = nlohmann::json::array();
  for (int z = 0; z < truth.P.rows(); ++z) {
    std::vector<double> row(truth.P.cols());
    for (int x = 0; x < truth.P.cols(); ++x) row[static_cast<std::size_t>(x)] = truth.P(z, x);
    doc["P"].push_back(row);
  }
  doc["sigma_min"] = truth.sigma_min;
  auto one_based = [](const std::vector<int>& set) {
    std::vector<int> out;
    out.reserve(set.size());
    for (int i : set) out.push_back(i + 1);
    return out;
  };
  doc["z_star_set"] = one_based(truth.z_star_set);
  doc["x_star_set"] = one_based(truth.x_star_set);
  doc["x_star_by_type"] = nlohmann::json::object();
  for (const auto& [type, set] : truth.x_star_by_type)
    doc["x_star_by_type"][detail::type_key(type)] = one_based(set);
  doc["p_complier"] = truth.p_complier;
  doc["mu_star"] = truth.mu_star;
  doc["mu_tilde_star"] = truth.mu_tilde_star;
  return doc;
}

}  // namespace iab
