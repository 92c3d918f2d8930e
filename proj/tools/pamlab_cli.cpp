// pamlab command line: one subcommand per experiment.
//
//   pamlab <subcommand> --config cfg.json [--seed N] [--out DIR] [--threads K]
//
// Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "pamlab/error.hpp"
#include "pamlab/experiments.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

int run(const std::string& sub, const std::string& config_path, const std::optional<std::uint64_t>& seed,
        const std::optional<std::string>& out, int threads) {
  std::ifstream in(config_path);
  if (!in) throw pamlab::ValidationError("cannot open config file " + config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw pamlab::ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw pamlab::ValidationError("config must be a JSON object");
  if (j.contains("experiment") && j["experiment"] != sub) {
    throw pamlab::ValidationError("config experiment '" + j["experiment"].dump() + "' does not match subcommand '" + sub + "'");
  }
  j["experiment"] = sub;
  // CLI overrides become part of the echoed config.
  if (seed) j["seed"] = *seed;
  if (out) j["output_dir"] = *out;
  const pamlab::ExperimentConfig cfg = pamlab::parse_config(j);
  if (threads > 0) omp_set_num_threads(threads);
  // A failed run must not leave an older summary looking current.
  std::error_code ec;
  std::filesystem::remove(std::filesystem::path(cfg.output_dir) / "summary.json", ec);

  const pamlab::ExperimentResult result = pamlab::run_experiment(cfg);
  for (const auto& p : pamlab::emit(result, cfg.output_dir)) std::cout << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pamlab: parabolic Anderson model experiments"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 0;
  for (const char* name : {"classify", "scales", "moments", "quenched", "variational", "selfint", "heuristic_profile"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "OpenMP threads")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    return run(sub, config, seed, out, threads);
  } catch (const pamlab::ValidationError& e) {
    std::cerr << "pamlab: invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const pamlab::NumericalError& e) {
    std::cerr << "pamlab: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "pamlab: " << e.what() << '\n';
    return 1;
  }
}
