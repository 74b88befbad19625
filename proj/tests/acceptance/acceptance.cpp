// End-to-end acceptance suite: reproduces the four experiments from the
// canned configs, validates the analytic series against the refined
// Crank-Nicolson solve, and runs the differentiation and property checks.
// Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "consol/commands.hpp"
#include "consol/fd_oracle.hpp"
#include "consol/rng.hpp"
#include "consol/run_config.hpp"
#include "consol/textio.hpp"
#include "consol/trainer.hpp"

using namespace consol;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void record(int criterion, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d %s: %s [%.0fs]\n", pass ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run_criterion(int criterion, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  record(criterion, name, pass, detail, secs);
}

RunConfig load_paper_config(const std::string& name) {
  const fs::path path =
      fs::path(CONSOLNN_REPO_DIR) / "configs" / "paper" / name;
  return parse_run_config(read_file(path));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

TrainResult run_forward_config(const std::string& config_name) {
  const RunConfig cfg = load_paper_config(config_name);
  return train_forward(cfg.problem, cfg.grid, cfg.layer_sizes, cfg.training);
}

TrainResult run_inverse_config(const std::string& config_name) {
  const RunConfig cfg = load_paper_config(config_name);
  return train_inverse(cfg.problem, cfg.grid, cfg.layer_sizes, cfg.training);
}

// ---------------------------------------------------------------------------

void criterion_forward_top() {
  run_criterion(1, "forward, drained top", [] {
    const TrainResult res = run_forward_config("forward_top.json");
    const double l2 = res.report.final_l2_error;
    const double mse = res.report.history.empty()
                           ? res.report.initial.mse_total
                           : res.report.history.back().mse_total;
    const bool pass = l2 <= 2e-2 && mse <= 1e-4;
    return std::make_pair(
        pass, "l2=" + fmt(l2) + " (<=2e-2), mse=" + fmt(mse) +
                  " (<=1e-4), epochs=" + std::to_string(res.report.epochs_run));
  });
}

void criterion_forward_top_bottom() {
  run_criterion(2, "forward, drained top and bottom", [] {
    const TrainResult res = run_forward_config("forward_top_bottom.json");
    const double l2 = res.report.final_l2_error;
    const bool pass = l2 <= 1e-2;
    return std::make_pair(
        pass, "l2=" + fmt(l2) + " (<=1e-2), epochs=" +
                  std::to_string(res.report.epochs_run));
  });
}

void criterion_inverse_top() {
  run_criterion(3, "inverse, drained top", [] {
    const TrainResult res = run_inverse_config("inverse_top.json");
    const double cv = res.report.final_cv.value_or(-1.0);
    const double err = std::fabs(cv - 0.6);
    const bool pass = err <= 1.5e-2;
    return std::make_pair(pass, "c_v=" + fmt(cv) + ", |c_v-0.6|=" + fmt(err) +
                                    " (<=1.5e-2)");
  });
}

void criterion_inverse_top_bottom() {
  run_criterion(4, "inverse, drained top and bottom", [] {
    const TrainResult res = run_inverse_config("inverse_top_bottom.json");
    const double cv = res.report.final_cv.value_or(-1.0);
    const double err = std::fabs(cv - 0.1);
    const bool pass = err <= 5e-3;
    return std::make_pair(pass, "c_v=" + fmt(cv) + ", |c_v-0.1|=" + fmt(err) +
                                    " (<=5e-3)");
  });
}

void criterion_oracle_equivalence() {
  run_criterion(5, "oracle equivalence and convergence order", [] {
    double worst_diff = 0.0;
    std::vector<double> ratios;
    for (const ProblemSpec spec :
         {ProblemSpec{1.0, 0.6, Drainage::TopOnly, 1.0, 1.0},
          ProblemSpec{1.0, 0.1, Drainage::TopAndBottom, 1.0, 1.0}}) {
      const double t0 = comparison_window_start(spec);
      const RefineResult res =
          refine_until(spec, 1e-4, {101, spec.t_max / 400.0});
      double diff = 0.0;
      for (std::size_t j = 0; j < res.solution.time.size(); ++j) {
        if (res.solution.time[j] < t0) continue;
        for (std::size_t i = 0; i < res.solution.depth.size(); ++i)
          diff = std::max(diff,
                          std::fabs(res.solution.at(j, i) -
                                    pressure_ratio_at_depth(
                                        spec, res.solution.depth[i],
                                        res.solution.time[j])));
      }
      worst_diff = std::max(worst_diff, diff);

      // Error against the series must shrink ~4x per simultaneous halving.
      std::vector<double> errors;
      for (int level = 0; level < 3; ++level) {
        const int stride = 1 << level;
        const FDGrid grid{50 * stride + 1, spec.t_max / (200.0 * stride)};
        const FDSolution fd = fd_solve_sampled(spec, grid, 10 * stride);
        double err = 0.0;
        for (std::size_t j = 0; j < fd.time.size(); ++j) {
          if (fd.time[j] < t0) continue;
          for (std::size_t i = 0; i < fd.depth.size(); ++i)
            err = std::max(err, std::fabs(fd.at(j, i) -
                                          pressure_ratio_at_depth(
                                              spec, fd.depth[i], fd.time[j])));
        }
        errors.push_back(err);
      }
      for (std::size_t l = 0; l + 1 < errors.size(); ++l)
        ratios.push_back(errors[l] / errors[l + 1]);
    }
    bool ratios_ok = true;
    std::string ratio_text;
    for (double r : ratios) {
      ratios_ok = ratios_ok && r >= 3.0 && r <= 5.0;
      ratio_text += (ratio_text.empty() ? "" : ",") + fmt(r);
    }
    const bool pass = worst_diff <= 1e-3 && ratios_ok;
    return std::make_pair(pass, "max|fd-series|=" + fmt(worst_diff) +
                                    " (<=1e-3), ratios=[" + ratio_text +
                                    "] (in [3,5])");
  });
}

void criterion_autodiff() {
  run_criterion(6, "autodiff correctness", [] {
    // One-hidden-unit closed form at relative 1e-12.
    const ad::Tape unit_tape = build_network_tape({2, 1, 1});
    const double wz = 0.31, wt = -0.47, b0 = 0.11, v = 0.83, c = -0.05;
    const std::vector<double> unit_params{wz, wt, b0, v, c};
    ad::Workspace ws;
    const double in0[2] = {0.62, 0.28};
    const ad::DerivativeBundle out = unit_tape.eval(ws, in0, unit_params);
    const double s = wz * 0.62 + wt * 0.28 + b0;
    const double u = std::tanh(s);
    const double sech2 = 1.0 - u * u;
    auto rel = [](double a, double b) {
      return std::fabs(a - b) / std::max(1e-300, std::fabs(b));
    };
    bool closed_ok = rel(out.value, v * u + c) < 1e-12 &&
                     rel(out.d_dz, v * sech2 * wz) < 1e-12 &&
                     rel(out.d_dt, v * sech2 * wt) < 1e-12 &&
                     rel(out.d2_dz2, v * (-2.0 * u * sech2) * wz * wz) < 1e-12;

    // 100 random small-network gradient checks at relative 1e-5.
    Rng rng(987654321);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> ls{2};
      const int hidden = 1 + static_cast<int>(rng.below(3));
      for (int l = 0; l < hidden; ++l)
        ls.push_back(2 + static_cast<int>(rng.below(7)));
      ls.push_back(1);
      const ad::Tape tape = build_network_tape(ls);
      std::vector<double> params = init_network(ls, rng.below(1u << 31)).flatten();
      const double z = rng.uniform(), t = rng.uniform();
      const double target = rng.uniform();
      const double c_v = rng.uniform(0.1, 2.0);
      const double in[2] = {z, t};

      ad::Workspace w2;
      const ad::DerivativeBundle b = tape.eval(w2, in, params);
      std::vector<double> grad(params.size(), 0.0);
      const bool value_style = trial % 2 == 0;
      if (value_style) {
        tape.backward(w2, {2.0 * (b.value - target), 0.0, 0.0, 0.0}, params,
                      grad);
      } else {
        const double f = b.d_dt - c_v * b.d2_dz2;
        tape.backward(w2, {0.0, 0.0, 2.0 * f, -2.0 * f * c_v}, params, grad);
      }
      auto loss = [&](std::span<const double> p) {
        ad::Workspace w3;
        const ad::DerivativeBundle bb = tape.eval(w3, in, p);
        if (value_style) {
          const double e = bb.value - target;
          return e * e;
        }
        const double f = bb.d_dt - c_v * bb.d2_dz2;
        return f * f;
      };
      const double step = 1e-5;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + step;
        const double hi = loss(params);
        params[i] = keep - step;
        const double lo = loss(params);
        params[i] = keep;
        const double fd = (hi - lo) / (2.0 * step);
        const double scale = std::max({1.0, std::fabs(fd), std::fabs(grad[i])});
        if (std::fabs(fd - grad[i]) > 1e-5 * scale + 1e-8) ++failures;
      }
    }
    const bool pass = closed_ok && failures == 0;
    return std::make_pair(pass, std::string("closed-form ") +
                                    (closed_ok ? "ok" : "FAILED") +
                                    ", gradient mismatches=" +
                                    std::to_string(failures) + "/100 trials");
  });
}

void criterion_properties() {
  run_criterion(7, "property suite", [] {
    std::vector<std::string> failures;

    // Series boundary annihilation, exact.
    {
      const ProblemSpec spec{1.0, 0.6, Drainage::TopOnly, 1.0, 1.0};
      for (double t : {1e-9, 0.013, 0.44, 1.0})
        if (pressure_ratio(spec, 1.0, t) != 0.0) {
          failures.push_back("boundary-annihilation");
          break;
        }
    }

    // Monotone decay in time on the analytic grid.
    {
      const GridSolution sol = solve_analytic(
          {1.0, 0.1, Drainage::TopAndBottom, 1.0, 1.0}, {40, 40});
      for (std::size_t i = 0; i < sol.depth.size(); ++i)
        for (std::size_t j = 1; j + 1 < sol.time.size(); ++j)
          if (sol.at(j + 1, i) > sol.at(j, i) + 1e-9) {
            failures.push_back("monotone-decay");
            goto monotone_done;
          }
    monotone_done:;
    }

    // Latin hypercube stratification: one point per stratum per dimension.
    {
      const int n = 500;
      const auto pts = lhs_collocation({0.0, 1.0, 0.0, 1.0}, n, 2024);
      std::vector<bool> z_hit(n, false), t_hit(n, false);
      bool ok = true;
      for (const auto& pt : pts) {
        const int zi = std::min(n - 1, static_cast<int>(pt.z * n));
        const int ti = std::min(n - 1, static_cast<int>(pt.t * n));
        if (z_hit[zi] || t_hit[ti]) ok = false;
        z_hit[zi] = t_hit[ti] = true;
      }
      if (!ok) failures.push_back("lhs-stratification");
    }

    // Loss decomposition identity over a short training run.
    {
      TrainConfig cfg;
      cfg.mode = TrainMode::Forward;
      cfg.epochs = 30;
      cfg.batch_size = 32;
      cfg.learning_rate = 2e-3;
      cfg.n_c = 200;
      cfg.seed = 5;
      cfg.stop_mse.reset();
      const TrainResult res = train_forward(
          {1.0, 0.6, Drainage::TopOnly, 1.0, 1.0}, {15, 15}, {2, 8, 8, 1}, cfg);
      bool ok = res.report.initial.mse_total ==
                res.report.initial.mse_p + res.report.initial.mse_c;
      for (const auto& rec : res.report.history)
        ok = ok && rec.mse_total == rec.mse_p + rec.mse_c;
      if (!ok) failures.push_back("loss-decomposition");
    }

    // Seeded determinism: two identical CLI runs, byte-identical outputs.
    {
      const fs::path dir =
          fs::temp_directory_path() / "consol_acceptance_determinism";
      fs::remove_all(dir);
      fs::create_directories(dir);
      const nlohmann::json cfg = {
          {"schema_version", 1},
          {"problem",
           {{"height", 1.0}, {"c_v", 0.6}, {"drainage", "top"}, {"t_max", 1.0}}},
          {"grid", {{"n_z", 15}, {"n_t", 15}}},
          {"network", {{"hidden_layers", 2}, {"hidden_units", 8}}},
          {"training",
           {{"mode", "forward"},
            {"epochs", 20},
            {"batch_size", 20},
            {"learning_rate", 2e-3},
            {"n_c", 100},
            {"seed", 17}}}};
      write_file_atomic(dir / "config.json", cfg.dump(2));
      cli::CommandOptions opts;
      opts.config_path = (dir / "config.json").string();
      opts.quiet = true;
      opts.out_dir = (dir / "a").string();
      const int rc1 = cli::cmd_train_forward(opts);
      opts.out_dir = (dir / "b").string();
      const int rc2 = cli::cmd_train_forward(opts);
      bool ok = rc1 == 0 && rc2 == 0;
      for (const char* name : {"model.json", "history.csv", "prediction.csv"})
        ok = ok && read_file(dir / "a" / name) == read_file(dir / "b" / name);
      if (!ok) failures.push_back("seeded-determinism");
      fs::remove_all(dir);
    }

    // Adam zero-gradient identity.
    {
      std::vector<double> params{0.1, -0.7, 3.0};
      const std::vector<double> before = params;
      AdamState state(3, 1e-3);
      const std::vector<double> zero(3, 0.0);
      for (int i = 0; i < 5; ++i) adam_step(state, params, zero);
      if (params != before) failures.push_back("adam-zero-gradient");
    }

    std::string detail = "boundary, decay, lhs, loss-identity, determinism, adam";
    if (!failures.empty()) {
      detail = "failed:";
      for (const auto& f : failures) detail += " " + f;
    }
    return std::make_pair(failures.empty(), detail);
  });
}

}  // namespace

int main() {
  std::printf("acceptance suite (repo: %s)\n", CONSOLNN_REPO_DIR);
  criterion_oracle_equivalence();
  criterion_autodiff();
  criterion_properties();
  criterion_forward_top();
  criterion_forward_top_bottom();
  criterion_inverse_top();
  criterion_inverse_top_bottom();
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
