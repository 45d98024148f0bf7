#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ubrs/poly.hpp"

namespace ubrs {

struct SdpBlockDesc {
  int size = 0;
  bool diagonal = false;  // SDPA convention: written as a negative block size
};

/// One coefficient of a symmetric block matrix; only the upper triangle is
/// stored (row <= col), indices 0-based in memory and 1-based on disk.
struct SdpEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Block-diagonal SDP in the fixed sense convention
///   primal:  max <C,X>  s.t.  <A_i,X> = b_i,  X >= 0 (psd)
///   dual:    min b'y    s.t.  sum_i y_i A_i - C >= 0.
struct SdpStandardForm {
  std::vector<SdpBlockDesc> blocks;
  std::vector<SdpEntry> c_entries;
  std::vector<std::vector<SdpEntry>> constraints;  // A_1 .. A_m
  std::vector<double> b;

  int m() const { return static_cast<int>(constraints.size()); }
  int total_dim() const;
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, SlowProgress, IterLimit };
std::string to_string(SolveStatus status);

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iters = 200;
  double step_fraction = 0.98;  // fraction of the step to the psd boundary
  double initial_scale = 0.0;   // <= 0 selects 1 + max|data|
  bool verbose = false;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::SlowProgress;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> S;  // sum y_i A_i - C
  double primal_objective = 0.0;   // <C,X>
  double dual_objective = 0.0;     // b'y
  double primal_residual = 0.0;    // ||b - A(X)||_inf / (1 + ||b||_inf)
  double dual_residual = 0.0;      // ||C + S - A*(y)||_max / (1 + ||C||_max)
  double gap = 0.0;                // |<C,X> - b'y| / (1 + |b'y|)
  int iterations = 0;
};

/// Primal-dual path-following interior-point method (HKM direction with a
/// Mehrotra predictor-corrector and dense Cholesky on the Schur complement).
/// Deterministic: fixed summation order, no randomized pivoting.
SdpSolution solve(const SdpStandardForm& sf, const SolverOptions& opts = {});

/// SDPA sparse format (.dat-s).  Header: m / nblocks / block sizes (negative
/// for diagonal) / b vector; then "matno blockno i j value" entries, upper
/// triangle only, 1-based, matno 0 for C.  Values carry 17 significant digits
/// so that export o import o export is byte-stable.
std::string export_sdpa(const SdpStandardForm& sf);
/// Tolerant reader: flexible whitespace, '{' '}' '(' ')' ',' treated as
/// spaces, comment lines start with '"' or '*'.  Reports line numbers on
/// malformed input.
SdpStandardForm import_sdpa(const std::string& text);

// ---------------------------------------------------------------------------
// Bridge from the SOS compiler's problem shape (psd Gram blocks coupled to
// free scalar slots through linear equalities) to pure standard form.

struct SdpProblem;  // ubrs/sos.hpp

/// Affine recovery of one eliminated slot from solved Gram entries:
/// value = constant + sum coeff * X[block](row,col).
struct SlotDefinition {
  double constant = 0.0;
  std::vector<SdpEntry> gram_terms;  // value field is the coefficient
  int split_index = -1;              // >= 0: slot lives in the split diagonal block
};

struct SdpConversion {
  SdpStandardForm form;
  std::vector<SlotDefinition> slots;     // one per compiler slot
  double objective_offset = 0.0;         // compiler objective = offset - <C,X>
  int split_block = -1;                  // index of the split diagonal block, if any
  std::vector<int> kept_rows;            // SdpProblem row ids that became constraints

  double objective_value(const SdpSolution& sol) const {
    return objective_offset - sol.primal_objective;
  }
  std::vector<double> slot_values(const SdpSolution& sol) const;
};

/// Encodes the free scalar slots by Gaussian elimination against the
/// coefficient-matching rows; slots whose pivot vanishes fall back to a
/// split pair (u+ - u-) in one diagonal block.  The result has exactly the
/// Gram blocks (plus at most the split block), so feasibility and objective
/// are preserved bit-for-bit up to rounding in the elimination.
SdpConversion to_standard_form(const SdpProblem& p);

}  // namespace ubrs
