#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamlab/potential_models.hpp"
#include "pamlab/regvar_classifier.hpp"

namespace pamlab {

enum class Experiment { Classify, Scales, Moments, Quenched, Variational, Selfint, HeuristicProfile };

std::string experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);

/// Settings of the `variational` experiment.
struct VariationalConfig {
  std::string problem = "chi";  ///< chi, chi_tilde, chi_discrete, chi_gamma
  double rho = 1.0;
  double delta = 0.02;
  double gamma = 0.9;
  std::string grid = "auto";    ///< auto, cartesian, radial
  double L = 0.0;               ///< 0 selects the default grid
  double h = 0.0;
  int radius = 0;               ///< chi_discrete box radius, 0 = ceil(6/sqrt(delta)) + 5
  int max_iter = 100000;        ///< flow iteration budget
  bool write_minimizer = true;
};

/// Parsed and validated experiment configuration. `raw` keeps the JSON as
/// given (plus CLI overrides) for the output metadata.
struct ExperimentConfig {
  Experiment experiment = Experiment::Classify;
  std::optional<PotentialModel> model;
  nlohmann::json model_spec;
  int d = 1;
  std::vector<double> t_grid;
  int replicas = 0;             ///< 0: experiment default
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  std::vector<double> p_values{1.0, 2.0};
  int radius = 0;               ///< truncation box radius, 0: experiment default
  int seeds = 5;                ///< quenched: independent realizations
  int radius_cap = 0;           ///< quenched box cap, 0: default
  double classify_t_max = 1e8;
  int classify_points = 40;
  double quantile = 0.01;       ///< heuristic_profile conditioning fraction
  std::vector<double> q_values{2.0};  ///< selfint norms
  VariationalConfig variational;

  nlohmann::json raw;
};

/// Validates every field before anything runs; throws ValidationError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// CSV table with preformatted cells.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

/// 17 significant digits; nan and inf spelled out.
std::string fmt(double x);
std::string fmt(std::int64_t x);

struct ExperimentResult {
  nlohmann::json scalars = nlohmann::json::object();
  std::vector<Table> series;
  nlohmann::json metadata = nlohmann::json::object();
};

ExperimentResult run_classify(const ExperimentConfig& cfg);
ExperimentResult run_scales(const ExperimentConfig& cfg);
ExperimentResult run_moments(const ExperimentConfig& cfg);
ExperimentResult run_quenched(const ExperimentConfig& cfg);
ExperimentResult run_variational(const ExperimentConfig& cfg);
ExperimentResult run_selfint(const ExperimentConfig& cfg);
ExperimentResult run_heuristic_profile(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes <name>.csv per series, then summary.json. CSVs go through a
/// temporary name and are renamed; the summary is written last, so an IO
/// failure leaves no summary behind. Returns the written paths.
std::vector<std::filesystem::path> emit(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace pamlab
