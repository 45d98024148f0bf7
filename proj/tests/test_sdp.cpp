#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "ubrs/sdp.hpp"

using namespace ubrs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Strictly complementary primal-dual pair with a known optimum:
// X* = Q diag(pos, 0) Q', S* = Q diag(0, pos) Q', C = A*(y*) - S*, b = A(X*).
struct ConstructedSdp {
  SdpStandardForm sf;
  double optimum = 0.0;
};

ConstructedSdp make_random_sdp(std::mt19937_64& rng, int n, int m, int rank) {
  auto urand = [&]() { return (rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  MatrixXd G(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) G(i, j) = urand();
  }
  Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ();
  VectorXd lx = VectorXd::Zero(n), ls = VectorXd::Zero(n);
  for (int i = 0; i < rank; ++i) lx(i) = 0.2 + std::abs(urand());
  for (int i = rank; i < n; ++i) ls(i) = 0.2 + std::abs(urand());
  MatrixXd X = Q * lx.asDiagonal() * Q.transpose();
  MatrixXd S = Q * ls.asDiagonal() * Q.transpose();

  std::vector<MatrixXd> A(m);
  VectorXd y(m);
  for (int k = 0; k < m; ++k) {
    MatrixXd R(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) R(i, j) = urand();
    }
    A[k] = 0.5 * (R + R.transpose());
    y(k) = urand();
  }
  MatrixXd C = -S;
  for (int k = 0; k < m; ++k) C += y(k) * A[k];

  ConstructedSdp out;
  out.sf.blocks.push_back(SdpBlockDesc{n, false});
  auto push = [&](std::vector<SdpEntry>& dst, const MatrixXd& M) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        if (M(i, j) != 0.0) dst.push_back(SdpEntry{0, i, j, M(i, j)});
      }
    }
  };
  push(out.sf.c_entries, C);
  out.sf.constraints.resize(m);
  for (int k = 0; k < m; ++k) {
    push(out.sf.constraints[k], A[k]);
    out.sf.b.push_back((A[k].cwiseProduct(X)).sum());
  }
  out.optimum = (C.cwiseProduct(X)).sum();
  return out;
}

}  // namespace

TEST_CASE("micro sdp: trace fixed by the constraint") {
  // max <I,X> s.t. tr X = 2 on a 2x2 block: the objective is pinned at 2.
  SdpStandardForm sf;
  sf.blocks.push_back(SdpBlockDesc{2, false});
  sf.c_entries = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  sf.constraints = {{{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}};
  sf.b = {2.0};
  SolverOptions opts;
  opts.tolerance = 1e-10;
  SdpSolution sol = solve(sf, opts);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.primal_objective - 2.0) < 1e-8);
  CHECK(std::abs(sol.dual_objective - 2.0) < 1e-8);
}

TEST_CASE("micro sdp: min c with [[c,1],[1,c]] psd") {
  // Dual form: min y s.t. y*I - C >= 0 with C = [[0,-1],[-1,0]]: y* = 1.
  SdpStandardForm sf;
  sf.blocks.push_back(SdpBlockDesc{2, false});
  sf.c_entries = {{0, 0, 1, -1.0}};
  sf.constraints = {{{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}};
  sf.b = {1.0};
  SolverOptions opts;
  opts.tolerance = 1e-10;
  SdpSolution sol = solve(sf, opts);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.dual_objective - 1.0) < 1e-8);
  CHECK(std::abs(sol.y(0) - 1.0) < 1e-7);
}

TEST_CASE("micro sdp: infeasible trace") {
  // tr X = -1 with X psd has no solution; the y-ray certifies it.
  SdpStandardForm sf;
  sf.blocks.push_back(SdpBlockDesc{2, false});
  sf.constraints = {{{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}};
  sf.b = {-1.0};
  SdpSolution sol = solve(sf);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("random strictly complementary instances") {
  std::mt19937_64 rng(0xC0FFEE);
  int solved = 0;
  for (int trial = 0; trial < 25; ++trial) {
    int n = 3 + static_cast<int>(rng() % 6);
    int m = 2 + static_cast<int>(rng() % 5);
    int rank = 1 + static_cast<int>(rng() % (n - 1));
    ConstructedSdp inst = make_random_sdp(rng, n, m, rank);
    SdpSolution sol = solve(inst.sf);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.primal_objective - inst.optimum) /
              (1.0 + std::abs(inst.optimum)) < 1e-6);
    ++solved;
  }
  CHECK(solved == 25);
}

TEST_CASE("kkt residuals at optimality") {
  std::mt19937_64 rng(0xBEEF);
  ConstructedSdp inst = make_random_sdp(rng, 6, 4, 3);
  SolverOptions opts;
  opts.tolerance = 1e-9;
  SdpSolution sol = solve(inst.sf, opts);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.primal_residual <= 1e-9);
  CHECK(sol.dual_residual <= 1e-9);
  CHECK(sol.gap <= 1e-9);
  // X and S stay psd.
  for (const MatrixXd& X : sol.X) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(X, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * (1.0 + X.trace()));
  }
  for (const MatrixXd& S : sol.S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * (1.0 + S.trace()));
  }
}

TEST_CASE("diagonal blocks") {
  // max x0 + x1 s.t. x0 + 2 x1 = 1, x >= 0 elementwise -> optimum 1 at x0=1.
  SdpStandardForm sf;
  sf.blocks.push_back(SdpBlockDesc{2, true});
  sf.c_entries = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  sf.constraints = {{{0, 0, 0, 1.0}, {0, 1, 1, 2.0}}};
  sf.b = {1.0};
  SolverOptions opts;
  opts.tolerance = 1e-10;
  SdpSolution sol = solve(sf, opts);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.primal_objective - 1.0) < 1e-8);
}

TEST_CASE("sdpa export format") {
  SdpStandardForm sf;
  sf.blocks.push_back(SdpBlockDesc{2, false});
  sf.c_entries = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  sf.constraints = {{{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}};
  sf.b = {2.0};
  std::string text = export_sdpa(sf);
  // 4 header lines + C entries + A entries.
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 8);
  CHECK(text.find("0 1 1 1 1\n") != std::string::npos);
  CHECK(text.find("1 1 2 2 1\n") != std::string::npos);

  SdpStandardForm back = import_sdpa(text);
  CHECK(export_sdpa(back) == text);
  CHECK(back.blocks.size() == 1);
  CHECK(back.b.size() == 1);
}

TEST_CASE("sdpa import tolerates external formatting") {
  std::string text =
      "\"comment line\n"
      "* another comment\n"
      " 1 \n"
      " 2 \n"
      " {2, -3} \n"
      " 2.0, \n"
      "0 1 1 2 -0.5\n"
      "1 1 1 1 1.0\n"
      "1 2 3 3 4.0\n";
  SdpStandardForm sf = import_sdpa(text);
  CHECK(sf.m() == 1);
  REQUIRE(sf.blocks.size() == 2);
  CHECK(sf.blocks[0].size == 2);
  CHECK(!sf.blocks[0].diagonal);
  CHECK(sf.blocks[1].size == 3);
  CHECK(sf.blocks[1].diagonal);
  CHECK(sf.c_entries.size() == 1);

  // export o import o export is idempotent even for unsorted input.
  std::string once = export_sdpa(sf);
  CHECK(export_sdpa(import_sdpa(once)) == once);
}

TEST_CASE("sdpa import reports line numbers") {
  try {
    import_sdpa("1\n1\n2\n1.0\n0 1 1 1\n");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
  try {
    import_sdpa("1\n1\n2\n1.0\n0 1 3 3 1.0\n");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("out of block range") != std::string::npos);
  }
  // Off-diagonal entry in a diagonal block.
  CHECK_THROWS_AS(import_sdpa("1\n1\n-2\n1.0\n0 1 1 2 1.0\n"), IoError);
}
