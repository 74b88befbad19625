#include "consol/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <utility>

#include <json.hpp>

#include "consol/fd_oracle.hpp"
#include "consol/run_config.hpp"
#include "consol/textio.hpp"

namespace consol::cli {

namespace {

using nlohmann::json;

RunConfig load_config(const CommandOptions& opts) {
  const std::string text = read_file(opts.config_path);
  RunConfig cfg = parse_run_config(text);
  if (opts.seed_override) override_seed(cfg, *opts.seed_override);
  return cfg;
}

void echo_config(const RunConfig& cfg, bool quiet) {
  if (!quiet) std::cout << cfg.resolved.dump(2) << std::endl;
}

int run_guarded(bool quiet, const std::function<int()>& body) {
  try {
    return body();
  } catch (const TrainingDivergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  (void)quiet;
}

json summary_json(const char* command, const RunConfig& cfg,
                  const TrainReport& report) {
  const EpochRecord& last =
      report.history.empty() ? report.initial : report.history.back();
  json j;
  j["schema_version"] = 1;
  j["command"] = command;
  j["l2_error"] = report.final_l2_error;
  if (report.final_cv)
    j["final_cv"] = *report.final_cv;
  else
    j["final_cv"] = nullptr;
  j["epochs_run"] = report.epochs_run;
  j["final_mse_p"] = last.mse_p;
  j["final_mse_c"] = last.mse_c;
  j["final_mse_total"] = last.mse_total;
  j["config"] = cfg.resolved;
  j["metadata"] = {{"duration_seconds", report.duration_seconds}};
  return j;
}

EpochCallback progress_printer(bool quiet, bool with_cv) {
  if (quiet) return {};
  return [with_cv](const EpochRecord& r) {
    if (r.epoch % 200 != 0) return;
    std::fprintf(stderr, "epoch %6d  mse_p %.3e  mse_c %.3e  total %.3e",
                 r.epoch, r.mse_p, r.mse_c, r.mse_total);
    if (with_cv && r.c_v) std::fprintf(stderr, "  c_v %.4f", *r.c_v);
    std::fprintf(stderr, "\n");
  };
}

int run_training(const CommandOptions& opts, TrainMode mode) {
  const bool inverse = mode == TrainMode::Inverse;
  return run_guarded(opts.quiet, [&]() -> int {
    RunConfig cfg = load_config(opts);
    if (!cfg.has_network || !cfg.has_training)
      throw ConfigError("config: training commands need network and training sections");
    if (cfg.training.mode != mode)
      throw ConfigError(inverse ? "config: training.mode must be 'inverse'"
                                : "config: training.mode must be 'forward'");
    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);

    const TrainResult result =
        inverse ? train_inverse(cfg.problem, cfg.grid, cfg.layer_sizes,
                                cfg.training, progress_printer(opts.quiet, true))
                : train_forward(cfg.problem, cfg.grid, cfg.layer_sizes,
                                cfg.training, progress_printer(opts.quiet, false));

    const Evaluation ev = evaluate(result.params, cfg.problem, cfg.grid);
    save_model(out / "model.json", result.params);
    write_file_atomic(out / "history.csv", history_csv(result.report, inverse));
    write_grid_csv(out / "prediction.csv", ev.predicted);
    write_file_atomic(
        out / "summary.json",
        summary_json(inverse ? "train-inverse" : "train-forward", cfg,
                     result.report)
                .dump(2) +
            "\n");
    echo_config(cfg, opts.quiet);
    return kExitOk;
  });
}

}  // namespace

int cmd_generate(const CommandOptions& opts) {
  return run_guarded(opts.quiet, [&]() -> int {
    RunConfig cfg = load_config(opts);
    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);
    const GridSolution sol = solve_analytic(cfg.problem, cfg.grid);
    write_grid_csv(out / "solution.csv", sol);
    echo_config(cfg, opts.quiet);
    return kExitOk;
  });
}

int cmd_train_forward(const CommandOptions& opts) {
  return run_training(opts, TrainMode::Forward);
}

int cmd_train_inverse(const CommandOptions& opts) {
  return run_training(opts, TrainMode::Inverse);
}

int cmd_evaluate(const EvaluateOptions& opts) {
  return run_guarded(opts.quiet, [&]() -> int {
    const NetworkParams params = load_model(opts.model_path);
    const GridSolution ref = read_grid_csv(opts.reference_csv);
    if (ref.values.empty()) throw ConfigError("evaluate: empty reference grid");

    std::vector<double> predicted(ref.values.size());
    for (std::size_t j = 0; j < ref.time.size(); ++j)
      for (std::size_t i = 0; i < ref.depth.size(); ++i)
        predicted[j * ref.depth.size() + i] =
            forward(params, ref.depth[i], ref.time[j]);

    const double l2 = l2_relative_error(predicted, ref.values);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      max_abs = std::max(max_abs, std::fabs(predicted[i] - ref.values[i]));

    json slices = json::array();
    for (std::size_t j = 0; j < ref.time.size(); ++j) {
      const std::size_t n_z = ref.depth.size();
      std::span<const double> pred(predicted.data() + j * n_z, n_z);
      std::span<const double> exact(ref.values.data() + j * n_z, n_z);
      double den = 0.0;
      for (double v : exact) den += v * v;
      json s;
      s["t"] = ref.time[j];
      if (den > 0.0)
        s["l2_error"] = l2_relative_error(pred, exact);
      else
        s["l2_error"] = nullptr;
      slices.push_back(s);
    }

    json report;
    report["l2_error"] = l2;
    report["max_abs_error"] = max_abs;
    report["per_time_slice"] = slices;

    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);
    write_file_atomic(out / "report.json", report.dump(2) + "\n");
    if (!opts.quiet) std::cout << report.dump(2) << std::endl;
    return kExitOk;
  });
}

int cmd_oracle(const OracleOptions& opts) {
  return run_guarded(opts.quiet, [&]() -> int {
    RunConfig cfg = load_config(opts);
    if (!cfg.has_oracle)
      throw ConfigError("config: oracle command needs an oracle section");
    const std::filesystem::path out(opts.out_dir);
    std::filesystem::create_directories(out);

    const RefineResult res =
        refine_until(cfg.problem, cfg.oracle.tolerance,
                     FDGrid{cfg.oracle.n_z, cfg.oracle.dt});
    write_grid_csv(out / "fd_solution.csv", res.solution.as_grid());

    std::string table = "halving,n_z,dt,max_diff,ratio\n";
    for (std::size_t l = 0; l < res.successive_diffs.size(); ++l) {
      const int stride = 1 << (l + 1);
      table += std::to_string(l + 1);
      table += ',';
      table += std::to_string((cfg.oracle.n_z - 1) * stride + 1);
      table += ',';
      const double dt0 = cfg.oracle.dt > 0.0 ? cfg.oracle.dt
                                             : cfg.problem.t_max / 400.0;
      table += g17(dt0 / stride);
      table += ',';
      table += g17(res.successive_diffs[l]);
      table += ',';
      if (l > 0)
        table += g17(res.successive_diffs[l - 1] / res.successive_diffs[l]);
      table += '\n';
    }
    write_file_atomic(out / "convergence.csv", table);

    json report;
    report["halvings"] = res.halvings;
    report["final_n_z"] = res.n_z;
    report["final_dt"] = res.dt;
    report["successive_diffs"] = res.successive_diffs;
    report["window_t_start"] = comparison_window_start(cfg.problem);

    if (!opts.compare_csv.empty()) {
      const GridSolution ref = read_grid_csv(opts.compare_csv);
      // Index the FD samples by the bit patterns of (z, t); both files print
      // 17 significant digits, so aligned grids match exactly.
      std::map<std::pair<double, double>, double> fd_at;
      for (std::size_t j = 0; j < res.solution.time.size(); ++j)
        for (std::size_t i = 0; i < res.solution.depth.size(); ++i)
          fd_at[{res.solution.depth[i], res.solution.time[j]}] =
              res.solution.at(j, i);
      const double t0 = comparison_window_start(cfg.problem);
      double max_diff = 0.0;
      std::size_t shared = 0;
      for (std::size_t j = 0; j < ref.time.size(); ++j) {
        if (ref.time[j] < t0) continue;
        for (std::size_t i = 0; i < ref.depth.size(); ++i) {
          const auto it = fd_at.find({ref.depth[i], ref.time[j]});
          if (it == fd_at.end()) continue;
          ++shared;
          max_diff = std::max(max_diff, std::fabs(it->second - ref.at(j, i)));
        }
      }
      if (shared == 0)
        throw ConfigError("oracle: comparison grids share no (z, t) nodes");
      report["comparison"] = {{"reference", opts.compare_csv},
                              {"max_abs_diff", max_diff},
                              {"points_compared", shared}};
    }
    write_file_atomic(out / "oracle_report.json", report.dump(2) + "\n");
    if (!opts.quiet) std::cout << report.dump(2) << std::endl;
    return kExitOk;
  });
}

}  // namespace consol::cli
