#include <CLI11.hpp>

#include "consol/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Physics-constrained neural networks for one-dimensional "
               "consolidation: analytic data generation, forward/inverse "
               "training, evaluation and a finite-difference oracle."};
  app.require_subcommand(1);

  consol::cli::CommandOptions common;
  consol::cli::EvaluateOptions eval_opts;
  consol::cli::OracleOptions oracle_opts;

  auto add_common = [&](CLI::App* cmd, consol::cli::CommandOptions& o) {
    cmd->add_option("--config", o.config_path, "Run configuration JSON")
        ->required();
    cmd->add_option("--out-dir", o.out_dir, "Output directory");
    cmd->add_option("--seed", o.seed_override,
                    "Override the training seed from the config");
    cmd->add_flag("--quiet", o.quiet, "Suppress stdout echo and progress");
  };

  CLI::App* generate =
      app.add_subcommand("generate", "Write the analytic solution grid CSV");
  add_common(generate, common);

  CLI::App* train_f = app.add_subcommand(
      "train-forward", "Train on initial/boundary data with a PDE constraint");
  add_common(train_f, common);

  CLI::App* train_i = app.add_subcommand(
      "train-inverse", "Recover the coefficient of consolidation from samples");
  add_common(train_i, common);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Compare a trained model against a grid CSV");
  evaluate->add_option("--model", eval_opts.model_path, "Model JSON")->required();
  evaluate->add_option("--reference", eval_opts.reference_csv,
                       "Reference grid CSV (z,t,p_ratio)")
      ->required();
  evaluate->add_option("--out-dir", eval_opts.out_dir, "Output directory");
  evaluate->add_flag("--quiet", eval_opts.quiet, "Suppress stdout report");

  CLI::App* oracle = app.add_subcommand(
      "oracle", "Grid-refined Crank-Nicolson solve with a convergence table");
  add_common(oracle, oracle_opts);
  oracle->add_option("--compare", oracle_opts.compare_csv,
                     "Analytic grid CSV to diff against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : consol::cli::kExitConfig;
  }

  if (generate->parsed()) return consol::cli::cmd_generate(common);
  if (train_f->parsed()) return consol::cli::cmd_train_forward(common);
  if (train_i->parsed()) return consol::cli::cmd_train_inverse(common);
  if (evaluate->parsed()) return consol::cli::cmd_evaluate(eval_opts);
  if (oracle->parsed()) return consol::cli::cmd_oracle(oracle_opts);
  return consol::cli::kExitConfig;
}
