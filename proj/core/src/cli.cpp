#include "ubrs/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace ubrs::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (in.eof()) break;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string(out);
}

int emit_error(const std::string& message, int code) {
  ordered_json j;
  j["error"] = message;
  j["exit_code"] = code;
  std::printf("%s\n", j.dump().c_str());
  return code;
}

int mc_threads() {
  if (const char* env = std::getenv("UBRS_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
}

RelaxOptions make_options(const std::string& variant, int degree, double alpha) {
  RelaxOptions opts;
  opts.variant = variant_from_string(variant);
  opts.degree = degree;
  opts.alpha = alpha;
  if (degree < 2 || degree % 2 != 0) throw ModelError("degree must be even");
  return opts;
}

ordered_json manifest_base(const std::string& model_path, const std::string& variant, int degree,
                           double alpha, uint64_t seed) {
  ordered_json j;
  j["model_hash"] = hash_file(model_path);
  j["variant"] = variant;
  j["degree"] = degree;
  if (variant == "alpha") j["alpha"] = alpha;
  j["seed"] = seed;
  j["tool_version"] = kToolVersion;
  return j;
}

}  // namespace

int run_solve(const SolveArgs& args) {
  try {
    RelaxOptions opts = make_options(args.variant, args.degree, args.alpha);
    HybridModel model = load_model_file(args.model_path);
    const auto t0 = std::chrono::steady_clock::now();
    BuildResult build_result = build(model, opts);
    SolverOptions sopts;
    sopts.tolerance = args.tolerance;
    sopts.max_iters = args.max_iters;
    RelaxationSolution rs = solve_relaxation(build_result, sopts);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (rs.sol.status == SolveStatus::Infeasible || rs.sol.status == SolveStatus::Unbounded) {
      return emit_error("solver returned " + to_string(rs.sol.status), kSolverNotOptimal);
    }
    Certificate cert = extract(build_result, rs);

    fs::create_directories(args.out_dir);
    write_file((fs::path(args.out_dir) / "certificate.json").string(),
               certificate_to_json(cert));
    ordered_json man =
        manifest_base(args.model_path, args.variant, args.degree, args.alpha, 0);
    man["solver"] = {{"tolerance", args.tolerance}, {"max_iters", args.max_iters}};
    man["status"] = to_string(rs.optimize_status);
    man["recentered"] = rs.recentered;
    man["objective"] = cert.objective;
    man["iterations"] = rs.sol.iterations;
    man["wall_time_s"] = wall;
    write_file((fs::path(args.out_dir) / "manifest.json").string(), man.dump(2) + "\n");

    std::printf("status %s objective %.9g q %.9g (%d iterations, %.2f s)\n",
                to_string(rs.optimize_status).c_str(), cert.objective, cert.q,
                rs.sol.iterations, wall);
    if (rs.optimize_status != SolveStatus::Optimal) {
      std::fprintf(stderr, "warning: optimizer finished with status %s%s\n",
                   to_string(rs.optimize_status).c_str(),
                   rs.recentered ? "; certificate from the interior re-solve" : "");
      return kSolverNotOptimal;
    }
    return kOk;
  } catch (const ModelError& e) {
    return emit_error(e.what(), kModelError);
  } catch (const IoError& e) {
    return emit_error(e.what(), kModelError);
  } catch (const Error& e) {
    return emit_error(e.what(), kSolverNotOptimal);
  }
}

int run_export_sdpa(const ExportArgs& args) {
  try {
    RelaxOptions opts = make_options(args.variant, args.degree, args.alpha);
    HybridModel model = load_model_file(args.model_path);
    BuildResult build_result = build(model, opts);
    SdpConversion conv = to_standard_form(build_result.problem);
    write_file(args.out_file, export_sdpa(conv.form));
    std::printf("wrote %s (m=%d, %zu blocks)\n", args.out_file.c_str(), conv.form.m(),
                conv.form.blocks.size());
    return kOk;
  } catch (const ModelError& e) {
    return emit_error(e.what(), kModelError);
  } catch (const Error& e) {
    return emit_error(e.what(), kModelError);
  }
}

int run_levelset(const LevelsetArgs& args) {
  try {
    std::ifstream in(args.certificate_path);
    if (!in) throw IoError("cannot open certificate: " + args.certificate_path);
    std::stringstream ss;
    ss << in.rdbuf();
    Certificate cert = certificate_from_json(ss.str());
    const ModeCertificate& mc = cert.mode(args.mode_id);
    std::vector<int> counts(mc.box.size(), args.grid);
    LevelSetGrid grid = sample_levelset(cert, args.mode_id, counts);
    write_file(args.out_csv, grid.to_csv());
    int inside = 0;
    for (uint8_t b : grid.inside) inside += b;
    std::printf("wrote %s (%zu points, %d classified inside)\n", args.out_csv.c_str(),
                grid.values.size(), inside);
    return kOk;
  } catch (const Error& e) {
    return emit_error(e.what(), kModelError);
  }
}

int run_validate(const ValidateArgs& args) {
  try {
    HybridModel model = load_model_file(args.model_path);
    std::ifstream in(args.certificate_path);
    if (!in) throw IoError("cannot open certificate: " + args.certificate_path);
    std::stringstream ss;
    ss << in.rdbuf();
    Certificate cert = certificate_from_json(ss.str());

    ContainmentDirection direction = cert.variant == Variant::Inner
                                         ? ContainmentDirection::InnerMustBeContained
                                         : ContainmentDirection::OuterMustContain;
    SuccessSpec success;
    success.eps = args.eps;
    success.any_time = cert.variant == Variant::OuterFreeTime;

    fs::create_directories(args.out_dir);
    bool all_pass = true;
    int total_violations = 0;
    for (const ModeCertificate& mc : cert.modes) {
      if (args.mode_id && *args.mode_id != mc.mode_id) continue;
      GridSpec grid_spec;
      grid_spec.mode_id = mc.mode_id;
      grid_spec.points_per_axis.assign(mc.box.size(), args.grid);
      std::vector<int> counts(mc.box.size(), args.grid);
      LevelSetGrid grid = sample_levelset(cert, mc.mode_id, counts);
      McReport report =
          monte_carlo(model, grid_spec, args.trials, success, args.seed, mc_threads());
      ContainmentVerdict verdict = check_containment(report, grid, direction);
      all_pass &= verdict.pass;
      total_violations += static_cast<int>(verdict.violating_points.size());

      const std::string stem = "mode" + std::to_string(mc.mode_id);
      write_file((fs::path(args.out_dir) / (stem + "_levelset.csv")).string(), grid.to_csv());
      write_file((fs::path(args.out_dir) / (stem + "_mc.csv")).string(), report.to_csv());
      std::printf("mode %d: %s (%d points checked, %zu violations)\n", mc.mode_id,
                  verdict.pass ? "pass" : "FAIL", verdict.checked,
                  verdict.violating_points.size());
      for (int idx : verdict.violating_points) {
        std::string coords;
        for (double v : report.point(idx)) coords += detail::format_double(v) + " ";
        std::fprintf(stderr, "  violation at grid point %d: %s\n", idx, coords.c_str());
      }
    }
    ordered_json man = manifest_base(args.model_path, to_string(cert.variant), cert.degree,
                                     cert.alpha, args.seed);
    man["trials"] = args.trials;
    man["grid"] = args.grid;
    man["eps"] = args.eps;
    man["verdict"] = all_pass ? "pass" : "fail";
    man["violations"] = total_violations;
    write_file((fs::path(args.out_dir) / "validate_manifest.json").string(), man.dump(2) + "\n");
    return all_pass ? kOk : kValidationFailure;
  } catch (const ModelError& e) {
    return emit_error(e.what(), kModelError);
  } catch (const IoError& e) {
    return emit_error(e.what(), kModelError);
  } catch (const Error& e) {
    return emit_error(e.what(), kValidationFailure);
  }
}

int run_simulate(const SimulateArgs& args) {
  try {
    HybridModel model = load_model_file(args.model_path);
    const Mode& mode = model.mode_by_id(args.mode_id);
    if (args.x0.size() != mode.state_vars.size()) {
      throw ModelError("simulate: --x0 needs " + std::to_string(mode.state_vars.size()) +
                       " components for mode " + std::to_string(args.mode_id));
    }
    Trajectory traj = execute(model, args.mode_id, args.x0, args.seed);
    write_file(args.out_csv, trajectory_to_csv(model, traj));
    std::printf("%s after %zu segment(s), %zu event(s); final mode %d\n",
                to_string(traj.termination).c_str(), traj.segments.size(), traj.events.size(),
                traj.final_mode);
    return kOk;
  } catch (const ModelError& e) {
    return emit_error(e.what(), kModelError);
  } catch (const Error& e) {
    return emit_error(e.what(), kModelError);
  }
}

}  // namespace ubrs::cli
