#pragma once

#include "minimax/serialize.hpp"

#include <optional>

namespace minimax {

// Schema-validated run configuration. `effective` is the materialized config
// (every key present with its final value) persisted next to the artifacts;
// it reflects the config file, not command-line overrides, so artifact bytes
// do not depend on --threads.
struct RunConfig {
  std::string command;
  ProblemSpec problem;
  std::uint64_t seed = 1;
  Index N = 1000;
  Index R = 1000;
  Index S = 100000;
  int threads = 1;
  std::string out;
  std::string source = "population";     // solve: population | sample
  std::string covariance = "analytic";   // analytic | plugin
  bool force_qp = false;
  std::optional<Vector> gamma;           // evaluation point override
  std::optional<Perturbation> eta;       // value-deriv direction
  std::vector<Real> t_grid;
  CompareThresholds thresholds;
  bool force = false;                    // CLI --force, not a config key
  Json effective;
};

RunConfig parse_config_json(const Json& j);
RunConfig parse_config(const std::string& path);

// Executes the configured command, writing artifacts under config.out.
// ConfigError means a configuration problem (CLI exit 2); other Error
// subclasses are runtime failures (exit 1). Partial outputs are removed when
// an error is thrown.
void run_command(const RunConfig& config);

}  // namespace minimax
