#pragma once

#include <cstdint>
#include <vector>

#include "ubrs/model.hpp"

namespace ubrs {

struct SimOptions {
  double step = 0.0;             // integrator step; <= 0 selects horizon/2000
  double guard_time_tol = 1e-10; // bisection tolerance for event times
  int max_events = 10000;        // Zeno guard
  double domain_tol = 1e-9;      // box exit must exceed this (normalized units)
};

enum class Termination { HorizonReached, LeftDomain, StepLimit };
std::string to_string(Termination t);

/// One continuous stretch of an execution: fixed mode, fixed theta draw.
struct TrajectorySegment {
  int mode_id = 0;
  std::vector<double> theta;              // aligned with the mode's theta vars
  std::vector<double> times;              // strictly increasing samples
  std::vector<std::vector<double>> states;  // aligned with times
};

struct TrajectoryEvent {
  double time = 0.0;
  int edge_index = -1;
  std::vector<double> pre_state;
  std::vector<double> post_state;
};

struct Trajectory {
  std::vector<TrajectorySegment> segments;
  std::vector<TrajectoryEvent> events;
  Termination termination = Termination::HorizonReached;
  int final_mode = 0;
  std::vector<double> final_state;
  int simultaneous_guard_warnings = 0;
};

/// Integrates one mode from (t0, x0) with the given theta until the first
/// guard hit, box exit, or the horizon.  Fixed-step RK4; event times refined
/// by bisection.  Returns the segment and the index of the triggering edge
/// (-1 when none).
std::pair<TrajectorySegment, int> integrate_segment(const HybridModel& model, int mode_id,
                                                    std::span<const double> x0,
                                                    std::span<const double> theta, double t0,
                                                    const SimOptions& options);

/// Runs one execution: draw theta, flow, reset, repeat.  Theta is drawn at
/// t = 0 and after every reset, never in between.  Deterministic in
/// (model, mode0, x0, seed, options).
Trajectory execute(const HybridModel& model, int mode0, std::span<const double> x0, uint64_t seed,
                   const SimOptions& options = {});

struct GridSpec {
  int mode_id = 0;
  std::vector<int> points_per_axis;  // per state variable, each >= 2
};

struct SuccessSpec {
  double eps = 1e-3;     // sup-norm tolerance around the target set
  bool any_time = false; // true: entering the target at any t <= T counts
};

struct McReport {
  int mode_id = 0;
  std::vector<std::string> axis_names;
  std::vector<std::vector<double>> axes;  // per-axis grid values
  std::vector<int> trials;
  std::vector<int> successes;             // row-major over the axes
  SuccessSpec success;
  uint64_t seed = 0;

  int point_count() const { return static_cast<int>(successes.size()); }
  std::vector<double> point(int index) const;
  std::string to_csv() const;
};

/// Grid Monte Carlo sweep over the mode's box.  Per-trial seeds are derived
/// from (seed, point index, trial index), so the report is identical for any
/// thread count.
McReport monte_carlo(const HybridModel& model, const GridSpec& grid, int trials,
                     const SuccessSpec& success, uint64_t seed, int threads = 1,
                     const SimOptions& options = {});

enum class ContainmentDirection { OuterMustContain, InnerMustBeContained };

struct ContainmentVerdict {
  bool pass = true;
  std::vector<int> violating_points;  // indices into the grid
  int checked = 0;
};

struct LevelSetGrid;  // ubrs/relax.hpp

/// OuterMustContain: every all-success grid point must satisfy w >= 1.
/// InnerMustBeContained: every point the inner certificate claims must be
/// all-success in the report.
ContainmentVerdict check_containment(const McReport& report, const LevelSetGrid& grid,
                                     ContainmentDirection direction);

/// CSV row "t,mode,x...,theta..." per sample; states not present in the
/// current mode are written as nan.
std::string trajectory_to_csv(const HybridModel& model, const Trajectory& traj);

namespace detail {
/// Deterministic stream seed for (base, point, trial).
uint64_t derive_seed(uint64_t base, uint64_t point, uint64_t trial);
}  // namespace detail

}  // namespace ubrs
