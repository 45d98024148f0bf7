#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ubrs/poly.hpp"

namespace ubrs {

/// {x | h_i(x) >= 0 for all i, g_j(x) = 0 for all j}.  Equalities are kept
/// separately but are semantically the pair {g >= 0, -g >= 0}; domains and
/// targets normally have none, guards may.
struct SemialgebraicSet {
  std::vector<Polynomial> ineqs;
  std::vector<Polynomial> eqs;

  bool empty() const { return ineqs.empty() && eqs.empty(); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Mode {
  int id = 0;
  std::vector<int> state_vars;
  std::vector<Interval> box;  // mandatory bounding box per state variable
  std::vector<Polynomial> dynamics;
  SemialgebraicSet domain_extra;  // inequalities beyond the box
  std::vector<int> theta_vars;
  std::vector<Interval> theta_box;
  UniformBoxDistribution theta_dist;
  SemialgebraicSet target;      // may be empty: the mode is transit-only
  bool has_target = false;

  int dim() const { return static_cast<int>(state_vars.size()); }
  int theta_dim() const { return static_cast<int>(theta_vars.size()); }
};

struct Edge {
  int from = 0;
  int to = 0;
  SemialgebraicSet guard;        // over source states and source thetas
  std::vector<Polynomial> reset; // source states -> destination states
};

/// A quasi-uncertain hybrid system: modes with polynomial dynamics whose
/// uncertain parameter is redrawn on every mode entry, guarded edges with
/// polynomial resets, and a shared time horizon.
struct HybridModel {
  std::string name;
  std::string description;
  VarSpacePtr vars;  // "t" first, then every state/theta name once
  double horizon = 1.0;
  std::vector<Mode> modes;
  std::vector<Edge> edges;
  int time_var = 0;

  const Mode& mode_by_id(int id) const;
  int mode_index(int id) const;
};

/// Per-mode affine change of coordinates x = c*xhat + m sending the physical
/// boxes onto [-1,1]^n and [0,T] onto [0,1].
struct ScalingMap {
  struct ModeScaling {
    int mode_id = 0;
    std::vector<AffineVarMap> state_maps;  // xhat -> physical
    std::vector<AffineVarMap> theta_maps;
  };
  double horizon = 1.0;  // physical T; normalized time is t/T
  std::vector<ModeScaling> modes;

  const ModeScaling& for_mode(int id) const;
  /// physical -> normalized maps (the inverses of the stored ones).
  std::vector<AffineVarMap> inverse_state_maps(int mode_id) const;
  std::vector<AffineVarMap> inverse_theta_maps(int mode_id) const;
};

/// Parses and fully validates a model document (see README for the schema).
/// Error messages carry the JSON path of the offending field.
HybridModel load_model_json(const std::string& text);
HybridModel load_model_file(const std::string& path);

/// Canonical JSON rendering; load(serialize(m)) round-trips field-for-field.
std::string serialize_model(const HybridModel& model);

/// Rewrites the model onto [-1,1] boxes and horizon 1.  Trajectories of the
/// two models correspond bijectively under the returned map.
std::pair<HybridModel, ScalingMap> normalize(const HybridModel& model);

/// Inverse of normalize up to floating-point rounding.
HybridModel denormalize(const HybridModel& normalized, const ScalingMap& map);

struct AssumptionReport {
  int samples = 0;
  int guard_overlap_violations = 0;     // points on two guards of one mode
  int guard_target_overlap = 0;         // points on a guard and in the target
  int guard_interior_points = 0;        // guard points off the domain boundary
  std::vector<std::string> notes;

  bool clean() const {
    return guard_overlap_violations == 0 && guard_target_overlap == 0;
  }
};

/// Monte Carlo spot check of the structural assumptions (guards mutually
/// exclusive, guards disjoint from targets, guards on the domain boundary).
/// Zero counts mean "no violation found", never a proof.
AssumptionReport check_assumptions(const HybridModel& model, int samples);

}  // namespace ubrs
