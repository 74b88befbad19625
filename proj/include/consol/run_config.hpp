#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "consol/consolidation.hpp"
#include "consol/trainer.hpp"

namespace consol {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parsed run configuration. The JSON schema is strict: unknown fields are
// rejected, the schema version is checked, and the training seed must be
// explicit (no entropy defaults).
struct RunConfig {
  ProblemSpec problem;
  Grid grid;

  std::vector<int> layer_sizes;  // from network.hidden_layers/hidden_units
  bool has_network = false;

  TrainConfig training;
  bool has_training = false;

  struct OracleConfig {
    int n_z = 101;
    double dt = 0.0;  // <= 0 means t_max / 400
    double tolerance = 1e-4;
  } oracle;
  bool has_oracle = false;

  nlohmann::json resolved;  // echo of the config, with overrides applied
};

RunConfig parse_run_config(const std::string& text);

// Applies a command-line seed override to both the config and its echo.
void override_seed(RunConfig& config, std::uint64_t seed);

}  // namespace consol
