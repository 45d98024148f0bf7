#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ubrs/cli.hpp"

using namespace ubrs;
namespace fs = std::filesystem;

namespace {
std::string models_dir() { return UBRS_MODELS_DIR; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("ubrs_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("solve + levelset + validate pipeline on ex1") {
  fs::path dir = temp_dir("pipeline");

  cli::SolveArgs solve_args;
  solve_args.model_path = models_dir() + "/ex1_linear.json";
  solve_args.variant = "outer";
  solve_args.degree = 4;
  solve_args.out_dir = (dir / "run1").string();
  REQUIRE(cli::run_solve(solve_args) == cli::kOk);
  CHECK(fs::exists(dir / "run1" / "certificate.json"));
  CHECK(fs::exists(dir / "run1" / "manifest.json"));

  // Identical manifests reproduce byte-identical outputs.
  solve_args.out_dir = (dir / "run2").string();
  REQUIRE(cli::run_solve(solve_args) == cli::kOk);
  CHECK(slurp(dir / "run1" / "certificate.json") == slurp(dir / "run2" / "certificate.json"));

  cli::LevelsetArgs level_args;
  level_args.certificate_path = (dir / "run1" / "certificate.json").string();
  level_args.mode_id = 1;
  level_args.grid = 51;
  level_args.out_csv = (dir / "levelset.csv").string();
  REQUIRE(cli::run_levelset(level_args) == cli::kOk);
  std::string csv = slurp(dir / "levelset.csv");
  CHECK(csv.rfind("x,w,inside", 0) == 0);

  level_args.out_csv = (dir / "levelset2.csv").string();
  REQUIRE(cli::run_levelset(level_args) == cli::kOk);
  CHECK(slurp(dir / "levelset.csv") == slurp(dir / "levelset2.csv"));

  cli::ValidateArgs val_args;
  val_args.model_path = solve_args.model_path;
  val_args.certificate_path = level_args.certificate_path;
  val_args.grid = 51;
  val_args.trials = 10;
  val_args.eps = 1e-3;
  val_args.seed = 7;
  val_args.out_dir = (dir / "validate").string();
  CHECK(cli::run_validate(val_args) == cli::kOk);
  CHECK(fs::exists(dir / "validate" / "mode1_mc.csv"));

  // Re-running validation reproduces the CSVs byte for byte.
  cli::ValidateArgs val2 = val_args;
  val2.out_dir = (dir / "validate2").string();
  CHECK(cli::run_validate(val2) == cli::kOk);
  CHECK(slurp(dir / "validate" / "mode1_mc.csv") == slurp(dir / "validate2" / "mode1_mc.csv"));
}

TEST_CASE("export-sdpa round trip through the file") {
  fs::path dir = temp_dir("export");
  cli::ExportArgs args;
  args.model_path = models_dir() + "/ex1_linear.json";
  args.variant = "outer";
  args.degree = 4;
  args.out_file = (dir / "ex1_d4.dat-s").string();
  REQUIRE(cli::run_export_sdpa(args) == cli::kOk);
  std::string text = slurp(dir / "ex1_d4.dat-s");
  SdpStandardForm sf = import_sdpa(text);
  CHECK(export_sdpa(sf) == text);
  // Every block of the exported problem is a Gram block: the coefficient
  // slots were eliminated, not split.
  for (const SdpBlockDesc& b : sf.blocks) CHECK(!b.diagonal);
}

TEST_CASE("simulate writes a trajectory csv") {
  fs::path dir = temp_dir("simulate");
  cli::SimulateArgs args;
  args.model_path = models_dir() + "/logistic_inner.json";
  args.x0 = {0.9};
  args.mode_id = 2;
  args.seed = 5;
  args.out_csv = (dir / "traj.csv").string();
  REQUIRE(cli::run_simulate(args) == cli::kOk);
  std::string csv = slurp(dir / "traj.csv");
  CHECK(csv.rfind("t,mode,", 0) == 0);
  CHECK(csv.find("\n0,2,") != std::string::npos);
}

TEST_CASE("error paths return machine-readable codes") {
  cli::SolveArgs bad;
  bad.model_path = "/nonexistent/nowhere.json";
  CHECK(cli::run_solve(bad) == cli::kModelError);

  cli::SolveArgs alpha_multi;
  alpha_multi.model_path = models_dir() + "/logistic_inner.json";
  alpha_multi.variant = "alpha";
  alpha_multi.alpha = 0.9;
  alpha_multi.degree = 4;
  alpha_multi.out_dir = (temp_dir("err") / "x").string();
  CHECK(cli::run_solve(alpha_multi) == cli::kModelError);

  cli::ValidateArgs corrupt;
  corrupt.model_path = models_dir() + "/ex1_linear.json";
  fs::path dir = temp_dir("corrupt");
  std::ofstream(dir / "cert.json") << "{ not json";
  corrupt.certificate_path = (dir / "cert.json").string();
  CHECK(cli::run_validate(corrupt) == cli::kModelError);
}

TEST_CASE("model hash is stable") {
  std::string h1 = cli::hash_file(models_dir() + "/ex1_linear.json");
  std::string h2 = cli::hash_file(models_dir() + "/ex1_linear.json");
  CHECK(h1 == h2);
  CHECK(h1.size() == 16);
  CHECK(h1 != cli::hash_file(models_dir() + "/rimless_wheel.json"));
}
