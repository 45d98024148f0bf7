// Command-line front end: model -> relaxation -> solver -> certificate ->
// grids -> Monte Carlo validation.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ubrs/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ubrs: certified reachable-set approximations for uncertain hybrid systems"};
  app.require_subcommand(1);

  ubrs::cli::SolveArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "build and solve a relaxation");
  solve->add_option("model", solve_args.model_path, "model JSON file")->required();
  solve->add_option("--variant", solve_args.variant,
                    "outer | outer-free-time | inner | alpha");
  solve->add_option("--degree", solve_args.degree, "relaxation degree (even)");
  solve->add_option("--alpha", solve_args.alpha, "confidence level for --variant alpha");
  solve->add_option("--out", solve_args.out_dir, "output directory");
  solve->add_option("--tol", solve_args.tolerance, "solver tolerance");
  solve->add_option("--max-iters", solve_args.max_iters, "solver iteration cap");

  ubrs::cli::ExportArgs export_args;
  CLI::App* exp = app.add_subcommand("export-sdpa", "write the relaxation as an SDPA file");
  exp->add_option("model", export_args.model_path)->required();
  exp->add_option("--variant", export_args.variant);
  exp->add_option("--degree", export_args.degree);
  exp->add_option("--alpha", export_args.alpha);
  exp->add_option("--out", export_args.out_file, "output .dat-s path")->required();

  ubrs::cli::LevelsetArgs level_args;
  CLI::App* level = app.add_subcommand("levelset", "sample a certificate on a grid");
  level->add_option("certificate", level_args.certificate_path)->required();
  level->add_option("--mode", level_args.mode_id)->required();
  level->add_option("--grid", level_args.grid, "points per axis");
  level->add_option("--out", level_args.out_csv)->required();

  ubrs::cli::ValidateArgs validate_args;
  int validate_mode = -1;
  CLI::App* validate = app.add_subcommand("validate", "Monte Carlo containment check");
  validate->add_option("model", validate_args.model_path)->required();
  validate->add_option("certificate", validate_args.certificate_path)->required();
  validate->add_option("--grid", validate_args.grid, "points per axis");
  validate->add_option("--trials", validate_args.trials);
  validate->add_option("--eps", validate_args.eps, "target tolerance (sup-norm)");
  validate->add_option("--seed", validate_args.seed);
  validate->add_option("--mode", validate_mode, "restrict to one mode");
  validate->add_option("--out", validate_args.out_dir, "output directory");

  ubrs::cli::SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "run one execution and dump the trajectory");
  simulate->add_option("model", sim_args.model_path)->required();
  simulate->add_option("--x0", sim_args.x0, "initial state components")->required();
  simulate->add_option("--mode", sim_args.mode_id, "starting mode id");
  simulate->add_option("--seed", sim_args.seed);
  simulate->add_option("--out", sim_args.out_csv)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : ubrs::cli::kUsageError;
  }

  if (solve->parsed()) {
    if (solve_args.degree % 2 != 0 || solve_args.degree < 2) {
      return ubrs::cli::emit_error("degree must be even", ubrs::cli::kUsageError);
    }
    return ubrs::cli::run_solve(solve_args);
  }
  if (exp->parsed()) {
    if (export_args.degree % 2 != 0 || export_args.degree < 2) {
      return ubrs::cli::emit_error("degree must be even", ubrs::cli::kUsageError);
    }
    return ubrs::cli::run_export_sdpa(export_args);
  }
  if (level->parsed()) return ubrs::cli::run_levelset(level_args);
  if (validate->parsed()) {
    if (validate_mode >= 0) validate_args.mode_id = validate_mode;
    return ubrs::cli::run_validate(validate_args);
  }
  if (simulate->parsed()) return ubrs::cli::run_simulate(sim_args);
  return ubrs::cli::kUsageError;
}
