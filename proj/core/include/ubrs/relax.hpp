#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ubrs/model.hpp"
#include "ubrs/sos.hpp"

namespace ubrs {

enum class Variant { Outer, OuterFreeTime, Inner, AlphaConfidence };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct RelaxOptions {
  int degree = 4;  // even, >= 2
  Variant variant = Variant::Outer;
  double alpha = 1.0;  // AlphaConfidence only, in (0, 1]
};

/// Fully assembled relaxation plus the bookkeeping needed to pull the
/// certificate back into physical coordinates.
struct BuildResult {
  SdpProblem problem;
  Variant variant = Variant::Outer;
  int degree = 0;
  double alpha = 1.0;
  ScalingMap scaling;
  HybridModel normalized;
  struct ModeDecisions {
    int mode_id = 0;
    int w_id = -1;
    int v_id = -1;
  };
  std::vector<ModeDecisions> mode_decisions;
  int q_id = -1;
};

/// Constraints emitted per mode j (normalized coordinates, box inequalities
/// appended everywhere):
///   (i)   w_j in Q_d(D_j)
///   (ii)  v_j(1,x,th) + q in Q_d(X_Tj x Theta_j)          [terminal time]
///   (iii) -L_f v_j in Q_d([0,1] x D_j x Theta_j)
///   (iv)  w_j - <mu_thj, v_j(0,x,.)> - q - 1 in Q_d(D_j)
/// and per edge (j,k):
///   (v)   v_j - <mu_thk, v_k> o R_jk in Q_d([0,1] x G_jk x Theta_j),
/// minimizing sum_j of the Lebesgue pairing with w_j.
BuildResult build_outer(const HybridModel& model, const RelaxOptions& opts);

/// Same as build_outer except (ii) ranges over [0,1] x X_Tj x Theta_j with
/// time left free: reaching the target at any t <= T counts.
BuildResult build_free_time(const HybridModel& model, const RelaxOptions& opts);

/// Failure-set outer approximation whose complement is an inner BRS estimate.
/// v_j depends on (t,x) only; uncertainty acts adversarially in (iii); the
/// box facets not covered by guards carry trap constraints (iv').
BuildResult build_inner(const HybridModel& model, const RelaxOptions& opts);

/// Single-mode alpha-confidence variant with thresholds
/// tau1 = 1 + q(1-alpha) (S1) and tau2 = 1 - q*alpha (S2).
BuildResult build_alpha(const HybridModel& model, const RelaxOptions& opts);

BuildResult build(const HybridModel& model, const RelaxOptions& opts);

/// Result of the two-phase solve: phase one optimizes; when it stalls on the
/// duality gap (these relaxations are routinely degenerate), phase two
/// re-solves for an interior point of the feasible set with the objective
/// capped slightly above the phase-one value, which yields well-conditioned
/// Gram certificates without giving up the bound.
struct RelaxationSolution {
  SdpProblem problem;  // the problem instance the solution satisfies
  SdpConversion conv;
  SdpSolution sol;
  SolveStatus optimize_status = SolveStatus::SlowProgress;  // phase-one status
  double objective_bound = 0.0;  // phase-one objective value
  bool recentered = false;       // true when phase two produced the solution
};

RelaxationSolution solve_relaxation(const BuildResult& build, const SolverOptions& opts = {});

/// Copy of the problem with "objective <= cap" added through a nonnegative
/// slack and the objective cleared (used by the phase-two solve).
SdpProblem with_objective_cap(const SdpProblem& p, double cap);

struct ModeCertificate {
  int mode_id = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> theta_names;
  std::vector<Interval> box;  // physical
  Polynomial w;               // physical coordinates
  Polynomial v;               // physical (t, x, theta)
};

struct Certificate {
  Variant variant = Variant::Outer;
  int degree = 0;
  double alpha = 1.0;
  double q = 0.0;
  double objective = 0.0;  // sum_j integral of w_j over the normalized boxes
  SolveStatus status = SolveStatus::SlowProgress;
  double tau1 = 1.0;  // AlphaConfidence: S1 threshold
  double tau2 = 1.0;  // AlphaConfidence: S2 threshold
  std::vector<ModeCertificate> modes;

  const ModeCertificate& mode(int id) const;
};

/// Pulls the solved polynomials back through the inverse scaling into
/// physical coordinates and fills the variant thresholds.  The certificate's
/// objective is the Lebesgue pairing of its own w polynomials.
Certificate extract(const BuildResult& build, const RelaxationSolution& solution);

std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);

struct LevelSetGrid {
  int mode_id = 0;
  std::vector<std::string> axis_names;
  std::vector<std::vector<double>> axes;  // physical coordinates
  std::vector<double> values;             // w at each grid point, row-major
  double threshold = 1.0;
  std::vector<uint8_t> inside;            // certified-set membership per variant
  std::vector<uint8_t> in_s1, in_s2;      // AlphaConfidence only
  Variant variant = Variant::Outer;

  std::vector<double> point(int index) const;
  std::string to_csv() const;
};

/// Evaluates the certificate's w on a uniform grid over the mode's physical
/// box.  For Outer/OuterFreeTime `inside` is w >= 1; for Inner it is the
/// claimed BRS membership w < 1; for AlphaConfidence it mirrors in_s1 and the
/// two threshold columns are filled.
LevelSetGrid sample_levelset(const Certificate& cert, int mode_id,
                             const std::vector<int>& points_per_axis);

}  // namespace ubrs
