#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ubrs/relax.hpp"
#include "ubrs/sim.hpp"

namespace ubrs::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 2;
inline constexpr int kModelError = 3;
inline constexpr int kSolverNotOptimal = 4;
inline constexpr int kValidationFailure = 5;

inline constexpr const char* kToolVersion = "0.1.0";

/// 64-bit FNV-1a over the raw file bytes, rendered as hex.
std::string hash_file(const std::string& path);

struct SolveArgs {
  std::string model_path;
  std::string variant = "outer";
  int degree = 4;
  double alpha = 1.0;
  std::string out_dir = ".";
  double tolerance = 1e-8;
  int max_iters = 200;
  bool export_only = false;  // write the SDPA file instead of solving
};

struct LevelsetArgs {
  std::string certificate_path;
  int mode_id = 0;
  int grid = 101;  // points per axis
  std::string out_csv;
};

struct ValidateArgs {
  std::string model_path;
  std::string certificate_path;
  int grid = 101;
  int trials = 50;
  double eps = 1e-3;
  uint64_t seed = 0;
  std::string out_dir = ".";
  std::optional<int> mode_id;  // default: every mode with a grid-able box
};

struct SimulateArgs {
  std::string model_path;
  std::vector<double> x0;
  int mode_id = 0;
  uint64_t seed = 0;
  std::string out_csv;
};

struct ExportArgs {
  std::string model_path;
  std::string variant = "outer";
  int degree = 4;
  double alpha = 1.0;
  std::string out_file;
};

/// Solves the selected relaxation and writes certificate.json plus
/// manifest.json into the output directory.
int run_solve(const SolveArgs& args);
int run_export_sdpa(const ExportArgs& args);
int run_levelset(const LevelsetArgs& args);
/// Monte Carlo sweep plus containment check; direction inferred from the
/// certificate variant.  Exit code 0 iff the verdict passes.
int run_validate(const ValidateArgs& args);
int run_simulate(const SimulateArgs& args);

/// MC thread cap: UBRS_THREADS when set, hardware concurrency otherwise.
int mc_threads();

/// Prints {"error": ..., "exit_code": n} on stdout and returns n.
int emit_error(const std::string& message, int code);

}  // namespace ubrs::cli
