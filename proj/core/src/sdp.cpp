#include "ubrs/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ubrs/sos.hpp"

namespace ubrs {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::SlowProgress: return "SlowProgress";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

int SdpStandardForm::total_dim() const {
  int n = 0;
  for (const auto& blk : blocks) n += blk.size;
  return n;
}

void SdpStandardForm::validate() const {
  if (blocks.empty()) throw SolverError("standard form has no blocks");
  if (b.size() != constraints.size()) throw SolverError("b length does not match constraints");
  auto check_entries = [&](const std::vector<SdpEntry>& es, const char* what) {
    for (const SdpEntry& e : es) {
      if (e.block < 0 || e.block >= static_cast<int>(blocks.size())) {
        throw SolverError(std::string(what) + ": block index out of range");
      }
      const SdpBlockDesc& blk = blocks[e.block];
      if (e.row < 0 || e.col < e.row || e.col >= blk.size) {
        throw SolverError(std::string(what) + ": entry index out of block range");
      }
      if (blk.diagonal && e.row != e.col) {
        throw SolverError(std::string(what) + ": off-diagonal entry in diagonal block");
      }
    }
  };
  check_entries(c_entries, "C");
  for (const auto& a : constraints) check_entries(a, "A");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd scatter(const std::vector<SdpEntry>& entries, int block, int n) {
  MatrixXd M = MatrixXd::Zero(n, n);
  for (const SdpEntry& e : entries) {
    if (e.block != block) continue;
    M(e.row, e.col) += e.value;
    if (e.row != e.col) M(e.col, e.row) += e.value;
  }
  return M;
}

// tr(A * M) for sparse symmetric A (upper entries) and arbitrary dense M.
double inner_sparse(const std::vector<SdpEntry>& entries, int block, const MatrixXd& M) {
  double sum = 0.0;
  for (const SdpEntry& e : entries) {
    if (e.block != block) continue;
    if (e.row == e.col) {
      sum += e.value * M(e.row, e.row);
    } else {
      sum += e.value * (M(e.row, e.col) + M(e.col, e.row));
    }
  }
  return sum;
}

double max_abs_entry(const std::vector<SdpEntry>& entries) {
  double m = 0.0;
  for (const SdpEntry& e : entries) m = std::max(m, std::abs(e.value));
  return m;
}

constexpr double kInfStep = 1e30;

// sup{alpha : X + alpha*dX psd}; X must be positive definite.
double max_step(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd L = llt.matrixL();
  MatrixXd Y = L.triangularView<Eigen::Lower>().solve(dX);
  MatrixXd B = L.triangularView<Eigen::Lower>().solve(Y.transpose()).transpose();
  B = 0.5 * (B + B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(B, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return kInfStep;
  return -1.0 / lmin;
}

struct BlockData {
  int n = 0;
  std::vector<int> constraint_ids;                // constraints touching this block
  std::vector<std::vector<SdpEntry>> constraint_entries;  // aligned with constraint_ids
  std::vector<SdpEntry> c_entries;
};

}  // namespace

SdpSolution solve(const SdpStandardForm& sf, const SolverOptions& opts) {
  sf.validate();
  const int m = sf.m();
  const int nb = static_cast<int>(sf.blocks.size());
  const int n_total = sf.total_dim();

  // Group constraint entries per block so Schur assembly touches only the
  // constraints that live there.
  std::vector<BlockData> blocks(nb);
  for (int l = 0; l < nb; ++l) blocks[l].n = sf.blocks[l].size;
  for (const SdpEntry& e : sf.c_entries) blocks[e.block].c_entries.push_back(e);
  for (int i = 0; i < m; ++i) {
    std::map<int, std::vector<SdpEntry>> per_block;
    for (const SdpEntry& e : sf.constraints[i]) per_block[e.block].push_back(e);
    for (auto& [l, es] : per_block) {
      blocks[l].constraint_ids.push_back(i);
      blocks[l].constraint_entries.push_back(std::move(es));
    }
  }

  std::vector<MatrixXd> C(nb);
  for (int l = 0; l < nb; ++l) C[l] = scatter(sf.c_entries, l, blocks[l].n);

  double data_scale = max_abs_entry(sf.c_entries);
  for (const auto& a : sf.constraints) data_scale = std::max(data_scale, max_abs_entry(a));
  for (double v : sf.b) data_scale = std::max(data_scale, std::abs(v));
  const double eta = opts.initial_scale > 0 ? opts.initial_scale : 1.0 + data_scale;

  std::vector<MatrixXd> X(nb), S(nb);
  for (int l = 0; l < nb; ++l) {
    X[l] = eta * MatrixXd::Identity(blocks[l].n, blocks[l].n);
    S[l] = eta * MatrixXd::Identity(blocks[l].n, blocks[l].n);
  }
  VectorXd y = VectorXd::Zero(m);

  double b_inf = 0.0;
  for (double v : sf.b) b_inf = std::max(b_inf, std::abs(v));
  double c_inf = max_abs_entry(sf.c_entries);

  SdpSolution sol;
  sol.y = y;
  auto fill_solution = [&](SolveStatus status, int iters) {
    sol.status = status;
    sol.X = X;
    sol.S = S;
    sol.y = y;
    sol.iterations = iters;
    return sol;
  };

  // Remember the best iterate seen; non-optimal exits report it instead of
  // whatever the last (possibly ruined) step produced.
  SdpSolution best;
  double best_score = 1e300;
  auto remember_best = [&]() {
    double score = std::max({sol.primal_residual, sol.dual_residual, sol.gap});
    if (score < best_score) {
      best_score = score;
      best = sol;
      best.X = X;
      best.S = S;
      best.y = y;
    }
  };

  // Final feasibility polish: project X onto {A(X) = b} through the Gram
  // matrix of the constraints.  Certificates rest on primal feasibility, and
  // the minimum-norm correction is well conditioned after row equilibration
  // even when the interior-point iteration stalls on the duality gap.
  auto polish = [&](SdpSolution& out) {
    if (m == 0 || out.X.empty()) return;
    MatrixXd MA(m, m);
    std::map<int64_t, std::vector<std::pair<int, double>>> entry_owners;
    for (int i = 0; i < m; ++i) {
      for (const SdpEntry& e : sf.constraints[i]) {
        int64_t key = (static_cast<int64_t>(e.block) << 40) |
                      (static_cast<int64_t>(e.row) << 20) | e.col;
        entry_owners[key].emplace_back(i, e.value);
      }
    }
    MA.setZero();
    for (const auto& [key, owners] : entry_owners) {
      const int row = static_cast<int>((key >> 20) & 0xfffff);
      const int col = static_cast<int>(key & 0xfffff);
      const double sym = row == col ? 1.0 : 2.0;
      for (const auto& [i, vi] : owners) {
        for (const auto& [j, vj] : owners) MA(i, j) += sym * vi * vj;
      }
    }
    Eigen::LLT<MatrixXd> llt(MA);
    if (llt.info() != Eigen::Success) {
      MA.diagonal().array() += 1e-12 * (1.0 + MA.trace() / m);
      llt.compute(MA);
      if (llt.info() != Eigen::Success) return;
    }
    for (int pass = 0; pass < 2; ++pass) {
      VectorXd r(m);
      for (int i = 0; i < m; ++i) {
        double ax = 0.0;
        for (int l = 0; l < nb; ++l) ax += inner_sparse(sf.constraints[i], l, out.X[l]);
        r(i) = sf.b[i] - ax;
      }
      VectorXd lambda = llt.solve(r);
      for (int i = 0; i < m; ++i) {
        for (const SdpEntry& e : sf.constraints[i]) {
          out.X[e.block](e.row, e.col) += lambda(i) * e.value;
          if (e.row != e.col) out.X[e.block](e.col, e.row) += lambda(i) * e.value;
        }
      }
    }
    // Refresh the reported primal statistics from the polished point.
    double rp_max = 0.0, pobj = 0.0;
    for (int i = 0; i < m; ++i) {
      double ax = 0.0;
      for (int l = 0; l < nb; ++l) ax += inner_sparse(sf.constraints[i], l, out.X[l]);
      rp_max = std::max(rp_max, std::abs(sf.b[i] - ax));
    }
    for (int l = 0; l < nb; ++l) pobj += inner_sparse(sf.c_entries, l, out.X[l]);
    out.primal_residual = rp_max / (1.0 + b_inf);
    out.primal_objective = pobj;
    out.gap = std::abs(pobj - out.dual_objective) / (1.0 + std::abs(out.dual_objective));
  };

  // Snapshot of the last iterate that is both nearly feasible and far enough
  // inside the psd cone that the polishing projection cannot push its Gram
  // blocks indefinite.  Stalled runs extract certificates from here.
  SdpSolution interior;
  bool have_interior = false;

  auto finish_with = [&](SolveStatus status, int iters) {
    SdpSolution out;
    if (status != SolveStatus::Infeasible && status != SolveStatus::Unbounded && have_interior) {
      out = interior;
      out.status = status;
      out.iterations = iters;
      polish(out);
      return out;
    }
    if (best_score < 1e300 &&
        best_score < std::max({sol.primal_residual, sol.dual_residual, sol.gap})) {
      out = best;
      out.status = status;
      out.iterations = iters;
    } else {
      out = fill_solution(status, iters);
    }
    if (status != SolveStatus::Infeasible && status != SolveStatus::Unbounded) polish(out);
    return out;
  };

  int tiny_step_run = 0;

  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    // Residuals and objective values.
    VectorXd rp(m);
    for (int i = 0; i < m; ++i) {
      double ax = 0.0;
      for (int l = 0; l < nb; ++l) ax += inner_sparse(sf.constraints[i], l, X[l]);
      rp(i) = sf.b[i] - ax;
    }
    std::vector<MatrixXd> Rd(nb);
    double rd_max = 0.0;
    for (int l = 0; l < nb; ++l) {
      Rd[l] = C[l] + S[l];
      const BlockData& bd = blocks[l];
      for (size_t k = 0; k < bd.constraint_ids.size(); ++k) {
        const double yk = y(bd.constraint_ids[k]);
        if (yk == 0.0) continue;
        for (const SdpEntry& e : bd.constraint_entries[k]) {
          Rd[l](e.row, e.col) -= yk * e.value;
          if (e.row != e.col) Rd[l](e.col, e.row) -= yk * e.value;
        }
      }
      rd_max = std::max(rd_max, Rd[l].cwiseAbs().maxCoeff());
    }
    double pobj = 0.0;
    for (int l = 0; l < nb; ++l) pobj += (C[l].cwiseProduct(X[l])).sum();
    double dobj = y.dot(Eigen::Map<const VectorXd>(sf.b.data(), m));

    sol.primal_objective = pobj;
    sol.dual_objective = dobj;
    sol.primal_residual = (m > 0 ? rp.cwiseAbs().maxCoeff() : 0.0) / (1.0 + b_inf);
    sol.dual_residual = rd_max / (1.0 + c_inf);
    sol.gap = std::abs(pobj - dobj) / (1.0 + std::abs(dobj));

    if (sol.primal_residual <= opts.tolerance && sol.dual_residual <= opts.tolerance &&
        sol.gap <= opts.tolerance) {
      SdpSolution out = fill_solution(SolveStatus::Optimal, iter);
      polish(out);
      return out;
    }
    remember_best();

    {
      double min_margin = 1e300;
      for (int l = 0; l < nb; ++l) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(X[l], Eigen::EigenvaluesOnly);
        min_margin = std::min(min_margin, es.eigenvalues().minCoeff() / (1.0 + X[l].trace()));
      }
      if (std::getenv("UBRS_IPM_TRACE")) {
        std::fprintf(stderr, "TRACE iter %d rp %.3e rd %.3e gap %.3e margin %.3e\n", iter,
                     sol.primal_residual, sol.dual_residual, sol.gap, min_margin);
      }
      if (sol.primal_residual <= std::max(opts.tolerance, 1e-9) &&
          sol.dual_residual <= std::max(opts.tolerance, 1e-9) && min_margin >= 1e-6) {
        interior = sol;
        interior.X = X;
        interior.S = S;
        interior.y = y;
        have_interior = true;
      }
    }

    // Divergence-based infeasibility certificates.
    double y_inf = m > 0 ? y.cwiseAbs().maxCoeff() : 0.0;
    if (y_inf > 1e7 * (1.0 + b_inf)) {
      VectorXd yn = y / y_inf;
      double bys = yn.dot(Eigen::Map<const VectorXd>(sf.b.data(), m));
      double zmin = 0.0, zmax = 0.0;
      for (int l = 0; l < nb; ++l) {
        MatrixXd Z = MatrixXd::Zero(blocks[l].n, blocks[l].n);
        const BlockData& bd = blocks[l];
        for (size_t k = 0; k < bd.constraint_ids.size(); ++k) {
          const double yk = yn(bd.constraint_ids[k]);
          for (const SdpEntry& e : bd.constraint_entries[k]) {
            Z(e.row, e.col) += yk * e.value;
            if (e.row != e.col) Z(e.col, e.row) += yk * e.value;
          }
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Z, Eigen::EigenvaluesOnly);
        zmin = std::min(zmin, es.eigenvalues().minCoeff());
        zmax = std::max(zmax, Z.cwiseAbs().maxCoeff());
      }
      // y-ray with A*(y) psd and b'y < 0 certifies primal infeasibility.
      if (bys < -1e-6 && zmin >= -1e-6 * (1.0 + zmax)) {
        return fill_solution(SolveStatus::Infeasible, iter);
      }
    }
    double trace_total = 0.0;
    for (int l = 0; l < nb; ++l) trace_total += X[l].trace();
    if (trace_total > 1e7 * n_total * eta) {
      double cxn = pobj / trace_total;
      double axn = 0.0;
      for (int i = 0; i < m; ++i) {
        double ax = 0.0;
        for (int l = 0; l < nb; ++l) ax += inner_sparse(sf.constraints[i], l, X[l]);
        axn = std::max(axn, std::abs(ax) / trace_total);
      }
      // X-ray in the feasible cone with <C,X> increasing certifies an
      // unbounded primal (equivalently an infeasible dual).
      if (axn <= 1e-6 && cxn >= 1e-6) {
        return fill_solution(SolveStatus::Unbounded, iter);
      }
    }

    if (iter == opts.max_iters) return finish_with(SolveStatus::IterLimit, iter);

    // Factor S and X blockwise.
    std::vector<Eigen::LLT<MatrixXd>> Sllt(nb), Xllt(nb);
    std::vector<MatrixXd> Sinv(nb);
    bool factor_ok = true;
    for (int l = 0; l < nb; ++l) {
      Sllt[l].compute(S[l]);
      Xllt[l].compute(X[l]);
      if (Sllt[l].info() != Eigen::Success || Xllt[l].info() != Eigen::Success) {
        factor_ok = false;
        break;
      }
      Sinv[l] = Sllt[l].solve(MatrixXd::Identity(blocks[l].n, blocks[l].n));
    }
    if (!factor_ok) return finish_with(SolveStatus::SlowProgress, iter);

    double mu = 0.0;
    for (int l = 0; l < nb; ++l) mu += (X[l].cwiseProduct(S[l])).sum();
    mu /= std::max(1, n_total);

    // Schur complement via the factored form: with X = R R' and S = L L',
    // M_ij = tr(A_i X A_j S^{-1}) = <U_i, U_j>_F for U_k = L^{-1} A_k R, so
    // M is a Gram matrix and stays numerically psd even when X and S are
    // nearly singular along the optimal face.
    MatrixXd M = MatrixXd::Zero(m, m);
    std::vector<std::vector<MatrixXd>> Ucache(nb);
    for (int l = 0; l < nb; ++l) {
      const BlockData& bd = blocks[l];
      const int n = bd.n;
      const size_t k = bd.constraint_ids.size();
      if (k == 0) continue;
      MatrixXd R = Xllt[l].matrixL();
      auto Ls = Sllt[l].matrixL();
      Ucache[l].resize(k);
      for (size_t kj = 0; kj < k; ++kj) {
        MatrixXd AjR = MatrixXd::Zero(n, n);
        for (const SdpEntry& e : bd.constraint_entries[kj]) {
          AjR.row(e.row) += e.value * R.row(e.col);
          if (e.row != e.col) AjR.row(e.col) += e.value * R.row(e.row);
        }
        Ucache[l][kj] = Ls.solve(AjR);
      }
      for (size_t kj = 0; kj < k; ++kj) {
        for (size_t ki = 0; ki <= kj; ++ki) {
          double v = (Ucache[l][ki].cwiseProduct(Ucache[l][kj])).sum();
          M(bd.constraint_ids[ki], bd.constraint_ids[kj]) += v;
          if (ki != kj) M(bd.constraint_ids[kj], bd.constraint_ids[ki]) += v;
        }
      }
    }

    Eigen::LLT<MatrixXd> schur(M);
    if (m > 0 && schur.info() != Eigen::Success) {
      // Deterministic diagonal lift for a rank-deficient Schur complement.
      double lift = 1e-12 * (1.0 + M.trace() / std::max(1, m));
      for (int attempt = 0; attempt < 5 && schur.info() != Eigen::Success; ++attempt) {
        M.diagonal().array() += lift;
        lift *= 100.0;
        schur.compute(M);
      }
      if (schur.info() != Eigen::Success) {
        return finish_with(SolveStatus::SlowProgress, iter);
      }
    }
    // The Schur system turns badly conditioned near the optimal face; two
    // rounds of iterative refinement keep A(dX) consistent with r_p.
    auto schur_solve = [&](const VectorXd& rhs) {
      VectorXd dy = schur.solve(rhs);
      for (int ref = 0; ref < 2; ++ref) {
        VectorXd resid = rhs - M * dy;
        dy += schur.solve(resid);
      }
      return dy;
    };

    // g_i = tr(A_i X Rd S^{-1}) = <U_i, V> with V = L^{-1} Rd R.
    VectorXd a_s = VectorXd::Zero(m), g = VectorXd::Zero(m);
    for (int l = 0; l < nb; ++l) {
      const BlockData& bd = blocks[l];
      if (bd.constraint_ids.empty()) continue;
      MatrixXd R = Xllt[l].matrixL();
      MatrixXd V = Sllt[l].matrixL().solve(Rd[l] * R);
      for (size_t ki = 0; ki < bd.constraint_ids.size(); ++ki) {
        const int i = bd.constraint_ids[ki];
        a_s(i) += inner_sparse(bd.constraint_entries[ki], l, Sinv[l]);
        g(i) += (Ucache[l][ki].cwiseProduct(V)).sum();
      }
    }

    auto compute_direction = [&](double sigma_mu, const std::vector<MatrixXd>* corr,
                                 VectorXd& dy, std::vector<MatrixXd>& dS,
                                 std::vector<MatrixXd>& dX) {
      VectorXd rhs(m);
      for (int i = 0; i < m; ++i) {
        double corr_term = 0.0;
        if (corr != nullptr) {
          for (int l = 0; l < nb; ++l) corr_term += inner_sparse(sf.constraints[i], l, (*corr)[l]);
        }
        rhs(i) = sigma_mu * a_s(i) - sf.b[i] + g(i) - corr_term;
      }
      dy = m > 0 ? schur_solve(rhs) : VectorXd();
      dS.assign(nb, MatrixXd());
      dX.assign(nb, MatrixXd());
      for (int l = 0; l < nb; ++l) {
        MatrixXd dSl = -Rd[l];
        const BlockData& bd = blocks[l];
        for (size_t k = 0; k < bd.constraint_ids.size(); ++k) {
          const double dyk = dy(bd.constraint_ids[k]);
          if (dyk == 0.0) continue;
          for (const SdpEntry& e : bd.constraint_entries[k]) {
            dSl(e.row, e.col) += dyk * e.value;
            if (e.row != e.col) dSl(e.col, e.row) += dyk * e.value;
          }
        }
        MatrixXd dXl = sigma_mu * Sinv[l] - X[l] - X[l] * dSl * Sinv[l];
        if (corr != nullptr) dXl -= (*corr)[l];
        dX[l] = 0.5 * (dXl + dXl.transpose()).eval();
        dS[l] = dSl;
      }
    };

    auto step_lengths = [&](const std::vector<MatrixXd>& dX, const std::vector<MatrixXd>& dS,
                            double tau, double& ap, double& ad) {
      ap = ad = kInfStep;
      for (int l = 0; l < nb; ++l) {
        ap = std::min(ap, max_step(X[l], dX[l]));
        ad = std::min(ad, max_step(S[l], dS[l]));
      }
      ap = std::min(1.0, tau * ap);
      ad = std::min(1.0, tau * ad);
    };

    // Predictor (affine scaling direction).
    VectorXd dy_aff;
    std::vector<MatrixXd> dS_aff, dX_aff;
    compute_direction(0.0, nullptr, dy_aff, dS_aff, dX_aff);
    double ap_aff, ad_aff;
    step_lengths(dX_aff, dS_aff, opts.step_fraction, ap_aff, ad_aff);

    double mu_aff = 0.0;
    for (int l = 0; l < nb; ++l) {
      mu_aff += ((X[l] + ap_aff * dX_aff[l]).cwiseProduct(S[l] + ad_aff * dS_aff[l])).sum();
    }
    mu_aff /= std::max(1, n_total);
    double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // Corrector with the second-order term dX_aff dS_aff S^{-1}.
    // Corrector with the second-order term; when the combined direction
    // yields only a vanishing step, retry with a more centered target
    // (larger sigma) instead of grinding against the boundary.
    std::vector<MatrixXd> corr(nb);
    for (int l = 0; l < nb; ++l) corr[l] = dX_aff[l] * dS_aff[l] * Sinv[l];
    VectorXd dy;
    std::vector<MatrixXd> dS, dX;
    double ap = 0.0, ad = 0.0;
    double tau = std::min(opts.step_fraction, 0.9 + 0.09 * std::min(ap_aff, ad_aff));
    for (int attempt = 0; attempt < 4; ++attempt) {
      compute_direction(sigma * mu, attempt < 3 ? &corr : nullptr, dy, dS, dX);
      step_lengths(dX, dS, tau, ap, ad);
      if (std::min(ap, ad) >= 0.05 || attempt == 3) break;
      sigma = 0.5 * (sigma + 1.0);
      tau = std::min(tau, 0.95);
    }

    if (ap < 1e-4 && ad < 1e-4) {
      if (++tiny_step_run >= 3) return finish_with(SolveStatus::SlowProgress, iter);
    } else {
      tiny_step_run = 0;
    }

    // A direction computed from a nearly singular Schur system can wreck
    // feasibility in one step; halve the primal step until the new residual
    // tracks its linear prediction (1 - ap) * rp.
    const double rp_abs = m > 0 ? rp.cwiseAbs().maxCoeff() : 0.0;
    for (int bt = 0; bt < 12 && m > 0; ++bt) {
      double rp_new = 0.0;
      for (int i = 0; i < m; ++i) {
        double ax = 0.0;
        for (int l = 0; l < nb; ++l) {
          ax += inner_sparse(sf.constraints[i], l, X[l]) +
                ap * inner_sparse(sf.constraints[i], l, dX[l]);
        }
        rp_new = std::max(rp_new, std::abs(sf.b[i] - ax));
      }
      // Slack proportional to mu: inexactness of the direction is harmless
      // while the iterate is still far from complementarity, and the budget
      // vanishes together with mu as the solution is approached.
      double allowed =
          (1.0 - 0.5 * ap) * rp_abs + (1e-2 * mu + 1e-12) * (1.0 + b_inf);
      if (rp_new <= allowed) break;
      ap *= 0.5;
    }

    for (int l = 0; l < nb; ++l) {
      X[l] += ap * dX[l];
      S[l] += ad * dS[l];
    }
    if (m > 0) y += ad * dy;

    if (opts.verbose) {
      std::fprintf(stderr, "iter %3d mu %.3e rp %.3e rd %.3e gap %.3e ap %.2f ad %.2f\n", iter,
                   mu, sol.primal_residual, sol.dual_residual, sol.gap, ap, ad);
    }
  }
  return finish_with(SolveStatus::IterLimit, opts.max_iters);
}

// ---------------------------------------------------------------------------
// Standard-form conversion with free-slot elimination.

namespace {

int64_t gram_key(int block, int r, int c) {
  return (static_cast<int64_t>(block) << 40) | (static_cast<int64_t>(r) << 20) |
         static_cast<int64_t>(c);
}

struct WorkRow {
  std::map<int, double> slots;
  std::map<int64_t, double> grams;
  double rhs = 0.0;
  int orig = 0;
  bool active = true;
};

struct WorkDef {
  int slot = -1;
  double constant = 0.0;
  std::map<int, double> slots;   // references to later-eliminated or split slots
  std::map<int64_t, double> grams;
};

}  // namespace

SdpConversion to_standard_form(const SdpProblem& p) {
  if (p.grams.empty() && p.slot_count == 0) throw SolverError("empty problem");

  std::vector<WorkRow> rows;
  rows.reserve(p.rows.size());
  for (size_t i = 0; i < p.rows.size(); ++i) {
    WorkRow r;
    r.orig = static_cast<int>(i);
    r.rhs = p.rows[i].rhs;
    for (const auto& [s, c] : p.rows[i].slot_terms) {
      if (c != 0.0) r.slots[s] += c;
    }
    for (const SdpEntry& e : p.rows[i].gram_terms) {
      if (e.value != 0.0) r.grams[gram_key(e.block, e.row, e.col)] += e.value;
    }
    rows.push_back(std::move(r));
  }

  std::vector<WorkDef> defs;
  std::vector<int> pivot_order;
  std::vector<int> split_of(p.slot_count, -1);
  std::vector<int> def_of(p.slot_count, -1);
  std::vector<int> split_slots;
  constexpr double kPivotTol = 1e-9;

  for (int s = 0; s < p.slot_count; ++s) {
    // Threshold pivoting: among rows whose coefficient on s is within a
    // factor 10 of the best available magnitude, prefer the sparsest row
    // (fewest slots, then fewest gram entries).  Pure sparsity-first picking
    // allows multiplicative pivot growth that wrecks the solver's scaling.
    double max_mag = 0.0;
    for (const WorkRow& r : rows) {
      if (!r.active) continue;
      auto it = r.slots.find(s);
      if (it != r.slots.end()) max_mag = std::max(max_mag, std::abs(it->second));
    }
    int best = -1;
    size_t best_nslots = SIZE_MAX;
    size_t best_len = SIZE_MAX;
    double best_mag = 0.0;
    for (size_t ri = 0; ri < rows.size(); ++ri) {
      if (!rows[ri].active) continue;
      auto it = rows[ri].slots.find(s);
      if (it == rows[ri].slots.end()) continue;
      double mag = std::abs(it->second);
      if (mag <= kPivotTol || mag < 0.1 * max_mag) continue;
      size_t nslots = rows[ri].slots.size();
      size_t len = nslots + rows[ri].grams.size();
      if (nslots < best_nslots || (nslots == best_nslots && len < best_len) ||
          (nslots == best_nslots && len == best_len && mag > best_mag)) {
        best = static_cast<int>(ri);
        best_nslots = nslots;
        best_len = len;
        best_mag = mag;
      }
    }
    if (best < 0) {
      split_of[s] = static_cast<int>(split_slots.size());
      split_slots.push_back(s);
      continue;
    }
    WorkRow& pr = rows[best];
    const double piv = pr.slots.at(s);
    WorkDef def;
    def.slot = s;
    def.constant = pr.rhs / piv;
    for (const auto& [s2, c2] : pr.slots) {
      if (s2 != s) def.slots[s2] = -c2 / piv;
    }
    for (const auto& [k, c2] : pr.grams) def.grams[k] = -c2 / piv;
    pr.active = false;

    for (WorkRow& r : rows) {
      if (!r.active) continue;
      auto it = r.slots.find(s);
      if (it == r.slots.end()) continue;
      const double c = it->second;
      r.slots.erase(it);
      r.rhs -= c * def.constant;
      for (const auto& [s2, c2] : def.slots) {
        double& v = r.slots[s2];
        v += c * c2;
        if (v == 0.0) r.slots.erase(s2);
      }
      for (const auto& [k, c2] : def.grams) {
        double& v = r.grams[k];
        v += c * c2;
        if (v == 0.0) r.grams.erase(k);
      }
    }
    def_of[s] = static_cast<int>(defs.size());
    defs.push_back(std::move(def));
    pivot_order.push_back(s);
  }

  // Back-substitute so every definition references only Gram entries and
  // split slots; definitions may only reference slots eliminated later.
  for (int i = static_cast<int>(defs.size()) - 1; i >= 0; --i) {
    WorkDef& d = defs[i];
    std::map<int, double> remaining;
    for (const auto& [s2, c2] : d.slots) {
      if (split_of[s2] >= 0) {
        remaining[s2] += c2;
        continue;
      }
      const WorkDef& d2 = defs.at(def_of[s2]);
      d.constant += c2 * d2.constant;
      for (const auto& [k, cg] : d2.grams) d.grams[k] += c2 * cg;
      for (const auto& [s3, c3] : d2.slots) remaining[s3] += c2 * c3;  // split refs only
    }
    d.slots = std::move(remaining);
  }

  SdpConversion conv;
  SdpStandardForm& sf = conv.form;
  for (const GramBlockInfo& g : p.grams) sf.blocks.push_back(SdpBlockDesc{g.size(), false});
  if (!split_slots.empty()) {
    conv.split_block = static_cast<int>(sf.blocks.size());
    sf.blocks.push_back(SdpBlockDesc{2 * static_cast<int>(split_slots.size()), true});
  }
  if (sf.blocks.empty()) {
    // All-scalar problem (no Gram blocks at all): still needs one block.
    conv.split_block = 0;
    sf.blocks.push_back(SdpBlockDesc{2 * std::max<int>(1, split_slots.size()), true});
  }

  auto unpack_key = [](int64_t k) {
    int block = static_cast<int>(k >> 40);
    int r = static_cast<int>((k >> 20) & 0xfffff);
    int c = static_cast<int>(k & 0xfffff);
    return std::tuple<int, int, int>(block, r, c);
  };

  for (const WorkRow& r : rows) {
    if (!r.active) continue;
    double maxc = 0.0;
    for (const auto& [k, c] : r.grams) maxc = std::max(maxc, std::abs(c));
    for (const auto& [s, c] : r.slots) maxc = std::max(maxc, std::abs(c));
    if (maxc < 1e-12) {
      if (std::abs(r.rhs) > 1e-9) {
        throw SolverError("standard form: inconsistent empty row (rhs " +
                          detail::format_double(r.rhs) + ")");
      }
      continue;  // redundant row
    }
    std::vector<SdpEntry> a;
    for (const auto& [k, c] : r.grams) {
      auto [block, row, col] = unpack_key(k);
      a.push_back(SdpEntry{block, row, col, row == col ? c : c / 2.0});
    }
    for (const auto& [s, c] : r.slots) {
      if (split_of[s] < 0) throw SolverError("standard form: dangling slot in reduced row");
      int k2 = split_of[s];
      a.push_back(SdpEntry{conv.split_block, 2 * k2, 2 * k2, c});
      a.push_back(SdpEntry{conv.split_block, 2 * k2 + 1, 2 * k2 + 1, -c});
    }
    // Equilibrate: unit max coefficient per row (a pure rescaling of y_i).
    double row_scale = 0.0;
    for (const SdpEntry& e : a) row_scale = std::max(row_scale, std::abs(e.value));
    for (SdpEntry& e : a) e.value /= row_scale;
    sf.constraints.push_back(std::move(a));
    sf.b.push_back(r.rhs / row_scale);
    conv.kept_rows.push_back(r.orig);
  }

  // Objective: min sum c_s u_s + c0  ==  c0 + const_part - <C, X>.
  std::map<int64_t, double> obj_gram;
  std::map<int, double> obj_split;
  double offset = p.objective_constant;
  for (const auto& [s, c] : p.objective) {
    if (split_of[s] >= 0) {
      obj_split[s] += c;
      continue;
    }
    if (def_of[s] < 0) throw SolverError("objective references an undefined slot");
    const WorkDef& d = defs[def_of[s]];
    offset += c * d.constant;
    for (const auto& [k, cg] : d.grams) obj_gram[k] += c * cg;
    for (const auto& [s2, c2] : d.slots) obj_split[s2] += c * c2;
  }
  for (const auto& [k, c] : obj_gram) {
    if (c == 0.0) continue;
    auto [block, row, col] = unpack_key(k);
    sf.c_entries.push_back(SdpEntry{block, row, col, row == col ? -c : -c / 2.0});
  }
  for (const auto& [s, c] : obj_split) {
    if (c == 0.0) continue;
    int k2 = split_of.at(s);
    sf.c_entries.push_back(SdpEntry{conv.split_block, 2 * k2, 2 * k2, -c});
    sf.c_entries.push_back(SdpEntry{conv.split_block, 2 * k2 + 1, 2 * k2 + 1, c});
  }
  conv.objective_offset = offset;

  conv.slots.resize(p.slot_count);
  for (int s = 0; s < p.slot_count; ++s) {
    SlotDefinition& out = conv.slots[s];
    if (split_of[s] >= 0) {
      out.split_index = split_of[s];
      continue;
    }
    const WorkDef& d = defs[def_of[s]];
    out.constant = d.constant;
    for (const auto& [k, c] : d.grams) {
      auto [block, row, col] = unpack_key(k);
      out.gram_terms.push_back(SdpEntry{block, row, col, c});
    }
    for (const auto& [s2, c2] : d.slots) {
      int k2 = split_of.at(s2);
      out.gram_terms.push_back(SdpEntry{conv.split_block, 2 * k2, 2 * k2, c2});
      out.gram_terms.push_back(SdpEntry{conv.split_block, 2 * k2 + 1, 2 * k2 + 1, -c2});
    }
  }
  return conv;
}

std::vector<double> SdpConversion::slot_values(const SdpSolution& sol) const {
  std::vector<double> out(slots.size(), 0.0);
  for (size_t s = 0; s < slots.size(); ++s) {
    const SlotDefinition& d = slots[s];
    if (d.split_index >= 0) {
      const Eigen::MatrixXd& B = sol.X.at(split_block);
      out[s] = B(2 * d.split_index, 2 * d.split_index) -
               B(2 * d.split_index + 1, 2 * d.split_index + 1);
      continue;
    }
    double v = d.constant;
    for (const SdpEntry& e : d.gram_terms) v += e.value * sol.X.at(e.block)(e.row, e.col);
    out[s] = v;
  }
  return out;
}

}  // namespace ubrs
