#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fedpd/algorithms.hpp"
#include "fedpd/problems.hpp"

namespace fedpd {

/// How to build the Problem of an experiment.
struct ProblemSpec {
  std::string kind = "weak";  // weak | strong | identical | csv | quadratic_pair | chain
  std::string family = "penalized_logistic";  // penalized_logistic | logistic | linear_regression
  double alpha = 1.0;
  double beta = 0.1;
  std::size_t agents = 10;
  std::size_t samples_per_agent = 100;
  std::size_t dim = 20;
  double noise_halfwidth = 1.0;  // strong only
  std::uint64_t seed = 0;        // data generation
  std::string path;              // csv only; relative paths resolve against the config file
  std::optional<double> lipschitz;  // default: data-derived bound, 1 for quadratic_pair, 27 pi for chain
  std::size_t T_chain = 16;      // chain only
  double eps = 0.01;             // chain only
};

struct ExperimentConfig {
  ExperimentConfig() { run.threads = 0; }  // all cores unless configured

  ProblemSpec problem;
  RunConfig run;
  std::size_t trace_every = 1;
  std::string output_dir = "fedpd_out";
};

/// Strict parse: unknown keys and type mismatches throw ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

LossFamily parse_family(const ProblemSpec& spec);
Problem build_problem(const ProblemSpec& spec);

/// The configuration with every default materialised. With a problem, the
/// oracle defaults that depend on L (inner stepsize, max_inner) are resolved too.
nlohmann::json to_json(const ExperimentConfig& config, const Problem* problem = nullptr);

}  // namespace fedpd
