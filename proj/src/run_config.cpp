#include "consol/run_config.hpp"

namespace consol {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("config: unknown field '" + where + it.key() + "'");
  }
}

const json& require(const json& obj, const std::string& where,
                    const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError("config: missing required field '" + where + key + "'");
  return *it;
}

double get_number(const json& obj, const std::string& where, const char* key) {
  const json& v = require(obj, where, key);
  if (!v.is_number())
    throw ConfigError("config: field '" + where + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& where, const char* key) {
  const json& v = require(obj, where, key);
  if (!v.is_number_integer())
    throw ConfigError("config: field '" + where + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root, "",
                 {"schema_version", "problem", "grid", "network", "training",
                  "oracle"});

  const int version = get_int(root, "", "schema_version");
  if (version != 1)
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(version));

  RunConfig cfg;

  {
    const json& p = require(root, "", "problem");
    reject_unknown(p, "problem.", {"height", "c_v", "drainage", "t_max", "p0"});
    cfg.problem.height = get_number(p, "problem.", "height");
    cfg.problem.c_v = get_number(p, "problem.", "c_v");
    cfg.problem.t_max = get_number(p, "problem.", "t_max");
    cfg.problem.p0 = p.contains("p0") ? get_number(p, "problem.", "p0") : 1.0;
    const std::string drainage =
        require(p, "problem.", "drainage").get<std::string>();
    if (drainage == "top")
      cfg.problem.drainage = Drainage::TopOnly;
    else if (drainage == "top_bottom")
      cfg.problem.drainage = Drainage::TopAndBottom;
    else
      throw ConfigError("config: problem.drainage must be 'top' or 'top_bottom'");
    try {
      cfg.problem.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  {
    const json& g = require(root, "", "grid");
    reject_unknown(g, "grid.", {"n_z", "n_t"});
    cfg.grid.n_z = get_int(g, "grid.", "n_z");
    cfg.grid.n_t = get_int(g, "grid.", "n_t");
    try {
      cfg.grid.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  if (root.contains("network")) {
    const json& n = root["network"];
    reject_unknown(n, "network.", {"hidden_layers", "hidden_units"});
    const int layers = get_int(n, "network.", "hidden_layers");
    const int units = get_int(n, "network.", "hidden_units");
    if (layers < 1 || units < 1)
      throw ConfigError("config: network sizes must be >= 1");
    cfg.layer_sizes.push_back(2);
    for (int i = 0; i < layers; ++i) cfg.layer_sizes.push_back(units);
    cfg.layer_sizes.push_back(1);
    cfg.has_network = true;
  }

  if (root.contains("training")) {
    const json& t = root["training"];
    reject_unknown(t, "training.",
                   {"mode", "epochs", "batch_size", "learning_rate", "n_c",
                    "sample_size", "seed", "stop_mse", "bottom_boundary",
                    "initial_series_terms"});
    const std::string mode = require(t, "training.", "mode").get<std::string>();
    if (mode == "forward")
      cfg.training.mode = TrainMode::Forward;
    else if (mode == "inverse")
      cfg.training.mode = TrainMode::Inverse;
    else
      throw ConfigError("config: training.mode must be 'forward' or 'inverse'");
    cfg.training.epochs = get_int(t, "training.", "epochs");
    cfg.training.batch_size = get_int(t, "training.", "batch_size");
    cfg.training.learning_rate = get_number(t, "training.", "learning_rate");
    const json& seed = require(t, "training.", "seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer())
      throw ConfigError("config: training.seed must be an integer");
    cfg.training.seed = seed.get<std::uint64_t>();

    if (cfg.training.mode == TrainMode::Forward) {
      cfg.training.n_c = get_int(t, "training.", "n_c");
      if (t.contains("sample_size"))
        throw ConfigError("config: training.sample_size is inverse-mode only");
    } else {
      cfg.training.sample_size = get_int(t, "training.", "sample_size");
      if (t.contains("n_c"))
        throw ConfigError("config: training.n_c is forward-mode only");
    }
    if (t.contains("initial_series_terms"))
      cfg.training.initial_series_terms =
          get_int(t, "training.", "initial_series_terms");
    cfg.training.stop_mse.reset();
    if (t.contains("stop_mse"))
      cfg.training.stop_mse = get_number(t, "training.", "stop_mse");
    if (t.contains("bottom_boundary")) {
      const std::string bb = t["bottom_boundary"].get<std::string>();
      if (bb == "value")
        cfg.training.bottom_boundary = BottomBoundary::ValueLabels;
      else if (bb == "no_flow_penalty")
        cfg.training.bottom_boundary = BottomBoundary::NoFlowPenalty;
      else
        throw ConfigError(
            "config: training.bottom_boundary must be 'value' or "
            "'no_flow_penalty'");
    }
    try {
      cfg.training.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.has_training = true;
  }

  if (root.contains("oracle")) {
    const json& o = root["oracle"];
    reject_unknown(o, "oracle.", {"n_z", "dt", "tolerance"});
    cfg.oracle.n_z = get_int(o, "oracle.", "n_z");
    if (o.contains("dt")) cfg.oracle.dt = get_number(o, "oracle.", "dt");
    cfg.oracle.tolerance = get_number(o, "oracle.", "tolerance");
    if (cfg.oracle.n_z < 3 || !(cfg.oracle.tolerance > 0.0))
      throw ConfigError("config: oracle.n_z must be >= 3 and tolerance > 0");
    cfg.has_oracle = true;
  }

  cfg.resolved = root;
  return cfg;
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.training.seed = seed;
  if (config.resolved.contains("training"))
    config.resolved["training"]["seed"] = seed;
}

}  // namespace consol
