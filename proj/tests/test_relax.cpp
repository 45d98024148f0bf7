#include <cmath>

#include "doctest.h"
#include "ubrs/relax.hpp"

using namespace ubrs;

namespace {
std::string models_dir() { return UBRS_MODELS_DIR; }
}

TEST_CASE("outer build structure for ex1") {
  HybridModel m = load_model_file(models_dir() + "/ex1_linear.json");
  RelaxOptions opts;
  opts.degree = 8;
  BuildResult b = build_outer(m, opts);
  // Single mode, no guards: four constraint families.
  CHECK(b.problem.constraints.size() == 4);
  CHECK(b.mode_decisions.size() == 1);
  CHECK(b.q_id >= 0);
  // w over x only, v over (t, x, th).
  CHECK(b.problem.decision(b.mode_decisions[0].w_id).vars.size() == 1);
  CHECK(b.problem.decision(b.mode_decisions[0].v_id).vars.size() == 3);
}

TEST_CASE("rimless wheel adds one guard family with the reset composition") {
  HybridModel m = load_model_file(models_dir() + "/rimless_wheel.json");
  RelaxOptions opts;
  opts.degree = 6;
  BuildResult b = build_outer(m, opts);
  CHECK(b.problem.constraints.size() == 5);  // 4 families + 1 guard coupling
  const SosConstraintBlock& guard = b.problem.constraints.back();
  CHECK(guard.label.find("guard") != std::string::npos);
  CHECK(guard.set.eqs.size() == 1);         // handled by a free multiplier
  CHECK(guard.free_mults.size() == 1);
}

TEST_CASE("option validation") {
  HybridModel m = load_model_file(models_dir() + "/ex1_linear.json");
  RelaxOptions opts;
  opts.degree = 7;
  CHECK_THROWS_WITH_AS(build_outer(m, opts), doctest::Contains("even"), ModelError);

  opts.degree = 8;
  opts.variant = Variant::AlphaConfidence;
  opts.alpha = 0.9;
  HybridModel multi = load_model_file(models_dir() + "/logistic_inner.json");
  CHECK_THROWS_WITH_AS(build_alpha(multi, opts), doctest::Contains("single mode"), ModelError);

  // A model with no target anywhere cannot pose the reachability question.
  HybridModel no_target = m;
  no_target.modes[0].target.ineqs.clear();
  no_target.modes[0].has_target = false;
  RelaxOptions outer;
  outer.degree = 4;
  CHECK_THROWS_WITH_AS(build_outer(no_target, outer), doctest::Contains("empty target union"),
                       ModelError);
}

TEST_CASE("free time keeps the terminal family time-indexed") {
  HybridModel m = load_model_file(models_dir() + "/beanbag.json");
  RelaxOptions opts;
  opts.degree = 4;
  opts.variant = Variant::OuterFreeTime;
  BuildResult b = build_free_time(m, opts);
  // Only mode 2 has a target; its terminal family quantifies over time too.
  bool found = false;
  for (const SosConstraintBlock& c : b.problem.constraints) {
    if (c.label.find("terminal-anytime") != std::string::npos) {
      found = true;
      bool has_time = false;
      for (int v : c.set.vars) has_time |= v == b.normalized.time_var;
      CHECK(has_time);
    }
  }
  CHECK(found);
  CHECK(b.mode_decisions.size() == 3);
}

TEST_CASE("inner build emits boundary facets minus the guard facet") {
  HybridModel m = load_model_file(models_dir() + "/logistic_inner.json");
  RelaxOptions opts;
  opts.degree = 4;
  opts.variant = Variant::Inner;
  BuildResult b = build_inner(m, opts);
  int boundary_mode1 = 0, boundary_mode2 = 0;
  for (const SosConstraintBlock& c : b.problem.constraints) {
    if (c.label.find("mode1:boundary") != std::string::npos) ++boundary_mode1;
    if (c.label.find("mode2:boundary") != std::string::npos) ++boundary_mode2;
  }
  // Mode 1 ([-1,0]) keeps both facets; mode 2 ([0,1]) loses x = 1 to the guard.
  CHECK(boundary_mode1 == 2);
  CHECK(boundary_mode2 == 1);
  // v is theta-free in the inner variant.
  for (const auto& md : b.mode_decisions) {
    CHECK(b.problem.decision(md.v_id).vars.size() == 2);  // (t, x)
  }
}

TEST_CASE("alpha build structure and thresholds at alpha = 1") {
  HybridModel m = load_model_file(models_dir() + "/ex1_linear.json");
  RelaxOptions opts;
  opts.degree = 4;
  opts.variant = Variant::AlphaConfidence;
  opts.alpha = 1.0;
  BuildResult b = build_alpha(m, opts);
  bool has_sign_block = false;
  for (const SosConstraintBlock& c : b.problem.constraints) {
    if (c.label == "q-sign") {
      has_sign_block = true;
      CHECK(b.problem.grams[c.gram_blocks[0]].size() == 1);
    }
  }
  CHECK(has_sign_block);

  RelaxationSolution rs = solve_relaxation(b);
  REQUIRE((rs.sol.status == SolveStatus::Optimal || rs.sol.status == SolveStatus::SlowProgress));
  Certificate cert = extract(b, rs);
  CHECK(cert.tau1 == doctest::Approx(1.0));  // 1 + q(1-1)
  CHECK(cert.q >= -1e-8);
  CHECK(cert.tau2 <= cert.tau1 + 1e-8);
}

TEST_CASE("extract maps the certificate into physical coordinates") {
  HybridModel m = load_model_file(models_dir() + "/ex1_linear.json");
  RelaxOptions opts;
  opts.degree = 4;
  BuildResult b = build_outer(m, opts);
  RelaxationSolution rs = solve_relaxation(b);
  REQUIRE(rs.sol.status == SolveStatus::Optimal);
  Certificate cert = extract(b, rs);
  REQUIRE(cert.modes.size() == 1);
  // Physical box equals the model's box (already [-1,1] for ex1, so the
  // scaling is the identity and reconstruction passes through).
  CHECK(cert.modes[0].box[0].lo == doctest::Approx(-1.0));
  CHECK(cert.modes[0].box[0].hi == doctest::Approx(1.0));
  CHECK(cert.objective > 0.0);
  CHECK(cert.objective < 2.0);

  // Round trip through JSON.
  std::string text = certificate_to_json(cert);
  Certificate back = certificate_from_json(text);
  CHECK(certificate_to_json(back) == text);
  CHECK(back.degree == cert.degree);
  Polynomial diff = sub(back.modes[0].w, cert.modes[0].w);
  for (const auto& [mono, c] : diff.terms()) CHECK(std::abs(c) < 1e-12);
}

TEST_CASE("levelset classification") {
  // Hand-made certificate: w = 2 (constant) marks everything inside.
  Certificate cert;
  cert.variant = Variant::Outer;
  cert.degree = 2;
  cert.status = SolveStatus::Optimal;
  ModeCertificate mc;
  mc.mode_id = 1;
  mc.state_names = {"x"};
  mc.box = {Interval{-1.0, 1.0}};
  auto vs = make_varspace({"t", "x"});
  mc.w = Polynomial::constant(vs, 2.0);
  mc.v = Polynomial(vs);
  cert.modes.push_back(mc);

  LevelSetGrid grid = sample_levelset(cert, 1, {11});
  CHECK(grid.values.size() == 11);
  for (uint8_t b : grid.inside) CHECK(b == 1);
  std::string csv = grid.to_csv();
  CHECK(csv.find("x,w,inside") == 0);

  // Inner variant flips the claim.
  cert.variant = Variant::Inner;
  LevelSetGrid inner = sample_levelset(cert, 1, {11});
  for (uint8_t b : inner.inside) CHECK(b == 0);

  CHECK_THROWS_AS(sample_levelset(cert, 9, {11}), ModelError);
}
