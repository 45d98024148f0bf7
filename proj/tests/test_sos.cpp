#include <cmath>
#include <random>

#include "doctest.h"
#include "ubrs/sos.hpp"

using namespace ubrs;

namespace {
SetDescription interval_set(const VarSpacePtr& vs, int var) {
  SetDescription set;
  set.vars = {var};
  set.box = {Interval{-1.0, 1.0}};
  Polynomial x = Polynomial::variable(vs, var);
  set.ineqs = {Polynomial::constant(vs, 1.0) - mul(x, x)};
  return set;
}
}  // namespace

TEST_CASE("declare slot counts") {
  auto vs = make_varspace({"t", "x", "th"});
  SosProgram prog(vs);
  int q = prog.declare("q", {}, 0);
  CHECK(prog.decision(q).slot_count() == 1);
  int w = prog.declare("w_1", {1}, 8);
  CHECK(prog.decision(w).slot_count() == 9);
  int v = prog.declare("v_1", {0, 1, 2}, 4);
  CHECK(prog.decision(v).slot_count() == 35);
  CHECK_THROWS_AS(prog.declare("q", {}, 0), CompileError);
}

TEST_CASE("explicit sos expression is feasible") {
  // 1 + x^2 on [-1, 1] at degree 2: G0 = diag(1, 1) is an exact witness.
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  Polynomial x = Polynomial::variable(vs, 0);
  AffinePolyExpr expr =
      AffinePolyExpr::from_poly(Polynomial::constant(vs, 1.0) + mul(x, x));
  prog.require_in_quadratic_module(expr, interval_set(vs, 0), 2, "explicit");
  prog.set_objective_min({});
  SdpProblem p = prog.assemble();
  SdpConversion conv = to_standard_form(p);
  SdpSolution sol = solve(conv.form);
  CHECK(sol.status == SolveStatus::Optimal);
}

TEST_CASE("x is not nonnegative on [-1,1]") {
  // No quadratic-module certificate can exist at any degree since x < 0 at
  // x = -1/2; the assembled SDP must come back infeasible.
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  AffinePolyExpr expr = AffinePolyExpr::from_poly(Polynomial::variable(vs, 0));
  prog.require_in_quadratic_module(expr, interval_set(vs, 0), 4, "impossible");
  prog.set_objective_min({});
  SdpProblem p = prog.assemble();
  SdpConversion conv = to_standard_form(p);
  SdpSolution sol = solve(conv.form);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("gram block sizes for a three-variable module") {
  auto vs = make_varspace({"t", "x", "th"});
  SosProgram prog(vs);
  int v = prog.declare("v", {0, 1, 2}, 4);
  SetDescription set;
  set.vars = {0, 1, 2};
  set.box = {Interval{0, 1}, Interval{-1, 1}, Interval{-1, 1}};
  Polynomial t = Polynomial::variable(vs, 0);
  Polynomial x = Polynomial::variable(vs, 1);
  Polynomial th = Polynomial::variable(vs, 2);
  set.ineqs = {t - mul(t, t), Polynomial::constant(vs, 1.0) - mul(x, x),
               Polynomial::constant(vs, 1.0) - mul(th, th)};
  prog.require_in_quadratic_module(prog.expr(v), set, 4, "sizes");
  SdpProblem p = prog.assemble();
  REQUIRE(p.grams.size() == 4);
  CHECK(p.grams[0].size() == 10);  // s_0 over (t,x,th) at degree 2: C(5,2)
  CHECK(p.grams[1].size() == 4);   // each box multiplier at degree 1: C(4,1)
  CHECK(p.grams[2].size() == 4);
  CHECK(p.grams[3].size() == 4);
  // Rows cover all monomials of degree <= 4 over three variables.
  CHECK(p.rows.size() == 35);
  for (const EqRow& r : p.rows) {
    CHECK(!(r.gram_terms.empty() && r.slot_terms.empty()));
  }
}

TEST_CASE("module degree rises to the expression degree") {
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  int w = prog.declare("w", {0}, 6);
  // x^3 * w has degree 9 -> module degree 10.
  AffinePolyExpr expr = prog.expr(w).times(pow(Polynomial::variable(vs, 0), 3));
  int ci = prog.require_in_quadratic_module(expr, interval_set(vs, 0), 6, "raised");
  SdpProblem p = prog.assemble();
  CHECK(p.constraints[ci].degree == 10);
  CHECK(p.grams[0].size() == 6);  // s_0 basis degree 5 in one variable
}

TEST_CASE("assembly is deterministic byte for byte") {
  auto build = [&]() {
    auto vs = make_varspace({"x"});
    SosProgram prog(vs);
    int w = prog.declare("w", {0}, 4);
    prog.require_in_quadratic_module(prog.expr(w), interval_set(vs, 0), 4, "a");
    AffinePolyExpr shifted =
        prog.expr(w) - AffinePolyExpr::from_poly(Polynomial::constant(vs, 1.0));
    prog.require_in_quadratic_module(shifted, interval_set(vs, 0), 4, "b");
    std::vector<int> var{0};
    std::vector<std::pair<double, double>> box{{-1.0, 1.0}};
    std::vector<double> moments = lebesgue_moments(var, box, 4);
    std::vector<std::pair<int, double>> obj;
    for (int i = 0; i < 5; ++i) obj.emplace_back(prog.decision(w).first_slot + i, moments[i]);
    prog.set_objective_min(obj);
    return prog.assemble();
  };
  SdpProblem p1 = build();
  SdpProblem p2 = build();
  CHECK(p1.debug_serialize() == p2.debug_serialize());
  std::string e1 = export_sdpa(to_standard_form(p1).form);
  std::string e2 = export_sdpa(to_standard_form(p2).form);
  CHECK(e1 == e2);
}

TEST_CASE("objective moments for the degree-4 interval problem") {
  std::vector<int> var{0};
  std::vector<std::pair<double, double>> box{{-1.0, 1.0}};
  std::vector<double> m = lebesgue_moments(var, box, 4);
  CHECK(m == std::vector<double>{2.0, 0.0, 2.0 / 3.0, 0.0, 0.4});
}

TEST_CASE("reconstruct") {
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  int q = prog.declare("q", {}, 0);
  int w = prog.declare("w", {0}, 2);
  SdpProblem p = prog.assemble();
  std::vector<double> slots{0.37, 0.0, 0.0, 0.0};
  Polynomial qp = reconstruct(p, q, slots);
  CHECK(to_string(qp) == "0.37");
  Polynomial wp = reconstruct(p, w, slots);
  CHECK(wp.is_zero());
  CHECK_THROWS_AS(reconstruct(p, w, std::vector<double>{0.1}), CompileError);
}

TEST_CASE("minimization against the quadratic module bound") {
  // min c s.t. c - (1 - x^2) in Q_d([-1,1]): optimum is max(1 - x^2) = 1.
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  int c = prog.declare("c", {}, 0);
  Polynomial x = Polynomial::variable(vs, 0);
  AffinePolyExpr expr =
      prog.expr(c) - AffinePolyExpr::from_poly(Polynomial::constant(vs, 1.0) - mul(x, x));
  prog.require_in_quadratic_module(expr, interval_set(vs, 0), 4, "bound");
  prog.set_objective_min({{prog.decision(c).first_slot, 1.0}});
  SdpProblem p = prog.assemble();
  SdpConversion conv = to_standard_form(p);
  SolverOptions opts;
  opts.tolerance = 1e-9;
  SdpSolution sol = solve(conv.form, opts);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(conv.objective_value(sol) == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<double> slots = conv.slot_values(sol);
  CHECK(slots[prog.decision(c).first_slot] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("free slot with no rows splits and the problem is unbounded") {
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  int q = prog.declare("q", {}, 0);
  prog.set_objective_min({{prog.decision(q).first_slot, 1.0}});
  SdpProblem p = prog.assemble();
  SdpConversion conv = to_standard_form(p);
  CHECK(conv.split_block >= 0);
  SdpSolution sol = solve(conv.form);
  CHECK(sol.status == SolveStatus::Unbounded);
}

TEST_CASE("empty problem is rejected") {
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  SdpProblem p = prog.assemble();
  CHECK_THROWS_AS(to_standard_form(p), SolverError);
}

TEST_CASE("certificate identity on a solved block") {
  auto vs = make_varspace({"x"});
  SosProgram prog(vs);
  int c = prog.declare("c", {}, 0);
  Polynomial x = Polynomial::variable(vs, 0);
  AffinePolyExpr expr =
      prog.expr(c) - AffinePolyExpr::from_poly(Polynomial::constant(vs, 1.0) - mul(x, x));
  int ci = prog.require_in_quadratic_module(expr, interval_set(vs, 0), 4, "bound");
  prog.set_objective_min({{prog.decision(c).first_slot, 1.0}});
  SdpProblem p = prog.assemble();
  SdpConversion conv = to_standard_form(p);
  SolverOptions opts;
  opts.tolerance = 1e-9;
  SdpSolution sol = solve(conv.form, opts);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CertificateIdentityStats stats = check_certificate_identity(p, conv, sol, ci, 200, 42);
  CHECK(stats.max_identity_residual <= 1e-6);
  CHECK(stats.min_gram_eigenvalue_margin >= 0.0);
  CHECK(stats.min_pointwise_value >= -1e-6);
}
