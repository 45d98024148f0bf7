#include "ubrs/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <thread>

#include "ubrs/relax.hpp"

namespace ubrs {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::HorizonReached: return "HorizonReached";
    case Termination::LeftDomain: return "LeftDomain";
    case Termination::StepLimit: return "StepLimit";
  }
  return "?";
}

namespace detail {
uint64_t derive_seed(uint64_t base, uint64_t point, uint64_t trial) {
  uint64_t h = splitmix64(base ^ 0x9e3779b97f4a7c15ULL);
  h = splitmix64(h ^ point);
  h = splitmix64(h ^ (trial * 0xd1342543de82ef95ULL + 1));
  return h;
}
}  // namespace detail

namespace {

double u01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

struct CompiledMode {
  const Mode* mode = nullptr;
  std::vector<CompiledPoly> dynamics;
  struct CompiledGuard {
    int edge_index = -1;
    std::vector<CompiledPoly> eqs;
    std::vector<CompiledPoly> ineqs;
  };
  std::vector<CompiledGuard> guards;
};

CompiledMode compile_mode(const HybridModel& model, int mode_id) {
  CompiledMode cm;
  cm.mode = &model.mode_by_id(mode_id);
  for (const Polynomial& f : cm.mode->dynamics) cm.dynamics.emplace_back(f);
  for (size_t e = 0; e < model.edges.size(); ++e) {
    if (model.edges[e].from != mode_id) continue;
    CompiledMode::CompiledGuard g;
    g.edge_index = static_cast<int>(e);
    for (const Polynomial& p : model.edges[e].guard.eqs) g.eqs.emplace_back(p);
    for (const Polynomial& p : model.edges[e].guard.ineqs) g.ineqs.emplace_back(p);
    cm.guards.push_back(std::move(g));
  }
  return cm;
}

// RK4 on the full varspace point; only the mode's state slots move.
void rk4_step(const CompiledMode& cm, std::vector<double>& point, double h,
              std::vector<double>& k1, std::vector<double>& k2, std::vector<double>& k3,
              std::vector<double>& k4, std::vector<double>& scratch) {
  const auto& sv = cm.mode->state_vars;
  const size_t n = sv.size();
  auto deriv = [&](const std::vector<double>& at, std::vector<double>& out) {
    for (size_t i = 0; i < n; ++i) out[i] = cm.dynamics[i].eval(at);
  };
  deriv(point, k1);
  scratch = point;
  for (size_t i = 0; i < n; ++i) scratch[sv[i]] = point[sv[i]] + 0.5 * h * k1[i];
  deriv(scratch, k2);
  for (size_t i = 0; i < n; ++i) scratch[sv[i]] = point[sv[i]] + 0.5 * h * k2[i];
  deriv(scratch, k3);
  for (size_t i = 0; i < n; ++i) scratch[sv[i]] = point[sv[i]] + h * k3[i];
  deriv(scratch, k4);
  for (size_t i = 0; i < n; ++i) {
    point[sv[i]] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

double guard_eq_value(const CompiledMode::CompiledGuard& g, const std::vector<double>& point) {
  return g.eqs.front().eval(point);
}

double guard_ineq_min(const CompiledMode::CompiledGuard& g, const std::vector<double>& point) {
  double m = 1e300;
  for (const CompiledPoly& p : g.ineqs) m = std::min(m, p.eval(point));
  return m;
}

bool guard_member(const CompiledMode::CompiledGuard& g, const std::vector<double>& point,
                  double eq_tol, double ineq_tol) {
  for (const CompiledPoly& p : g.eqs) {
    if (std::abs(p.eval(point)) > eq_tol) return false;
  }
  for (const CompiledPoly& p : g.ineqs) {
    if (p.eval(point) < -ineq_tol) return false;
  }
  return true;
}

// Signed distance-like box violation: positive when outside the closed box
// by the given normalized amount.
double box_violation(const Mode& mode, const std::vector<double>& point) {
  double worst = -1e300;
  for (size_t i = 0; i < mode.state_vars.size(); ++i) {
    const Interval& iv = mode.box[i];
    double c = (iv.hi - iv.lo) / 2.0;
    double m = (iv.hi + iv.lo) / 2.0;
    worst = std::max(worst, std::abs((point[mode.state_vars[i]] - m) / c) - 1.0);
  }
  return worst;
}

struct StepEvent {
  double time = 0.0;
  int guard = -1;  // index into CompiledMode::guards; -1 = box exit
  std::vector<double> state;
};

}  // namespace

std::pair<TrajectorySegment, int> integrate_segment(const HybridModel& model, int mode_id,
                                                    std::span<const double> x0,
                                                    std::span<const double> theta, double t0,
                                                    const SimOptions& options) {
  const CompiledMode cm = compile_mode(model, mode_id);
  const Mode& mode = *cm.mode;
  const double T = model.horizon;
  const double h = options.step > 0 ? options.step : T / 2000.0;
  if (theta.size() != mode.theta_vars.size()) throw ModelError("integrate_segment: theta size");
  if (x0.size() != mode.state_vars.size()) throw ModelError("integrate_segment: state size");

  std::vector<double> point(model.vars->size(), 0.0);
  for (size_t i = 0; i < mode.state_vars.size(); ++i) point[mode.state_vars[i]] = x0[i];
  for (size_t i = 0; i < mode.theta_vars.size(); ++i) point[mode.theta_vars[i]] = theta[i];
  point[model.time_var] = t0;

  TrajectorySegment seg;
  seg.mode_id = mode_id;
  seg.theta.assign(theta.begin(), theta.end());
  auto record = [&](double t) {
    seg.times.push_back(t);
    std::vector<double> x(mode.state_vars.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = point[mode.state_vars[i]];
    seg.states.push_back(std::move(x));
  };

  auto set_state = [&](const std::vector<double>& full) { point = full; };

  // Immediate guard membership at the segment start (a trajectory may begin
  // on a guard).
  record(t0);
  for (size_t gi = 0; gi < cm.guards.size(); ++gi) {
    if (guard_member(cm.guards[gi], point, 1e-10, 1e-10)) {
      return {seg, cm.guards[gi].edge_index};
    }
  }
  if (box_violation(mode, point) > options.domain_tol) {
    return {seg, -2};  // started outside: treated as an immediate domain exit
  }

  std::vector<double> k1(mode.dim()), k2(mode.dim()), k3(mode.dim()), k4(mode.dim());
  std::vector<double> scratch(point.size());
  std::vector<double> prev(point.size());

  double t = t0;
  while (t < T - 1e-15) {
    double step = std::min(h, T - t);
    prev = point;
    rk4_step(cm, point, step, k1, k2, k3, k4, scratch);
    double t_next = t + step;
    point[model.time_var] = t_next;

    // Bisection refinement of a bracketed scalar crossing.
    auto refine = [&](auto&& value_fn, double lo_t, double hi_t, const std::vector<double>& lo_x,
                      double target_side) -> StepEvent {
      // Integrates from lo_x over shrinking substeps; accuracy h^4 locally is
      // plenty for the event tolerance, and bisection keeps it robust.
      StepEvent ev;
      std::vector<double> base = lo_x;
      double a = lo_t, b = hi_t;
      std::vector<double> mid_state(point.size());
      while (b - a > options.guard_time_tol) {
        double mid = 0.5 * (a + b);
        mid_state = base;
        mid_state[model.time_var] = a;
        rk4_step(cm, mid_state, mid - a, k1, k2, k3, k4, scratch);
        mid_state[model.time_var] = mid;
        double v = value_fn(mid_state);
        if ((v >= 0) == (target_side >= 0)) {
          b = mid;
        } else {
          a = mid;
          base = mid_state;
        }
      }
      ev.time = 0.5 * (a + b);
      ev.state = base;
      rk4_step(cm, ev.state, ev.time - a, k1, k2, k3, k4, scratch);
      ev.state[model.time_var] = ev.time;
      return ev;
    };

    std::vector<StepEvent> candidates;
    for (size_t gi = 0; gi < cm.guards.size(); ++gi) {
      const auto& g = cm.guards[gi];
      if (!g.eqs.empty()) {
        double v_prev = guard_eq_value(g, prev);
        double v_next = guard_eq_value(g, point);
        if (v_prev == 0.0 || (v_prev < 0) != (v_next < 0)) {
          StepEvent ev = refine([&](const std::vector<double>& x) { return guard_eq_value(g, x); },
                                t, t_next, prev, v_next);
          if (guard_member(g, ev.state, 1e-6, 1e-6)) {
            ev.guard = static_cast<int>(gi);
            candidates.push_back(std::move(ev));
          }
        }
      } else {
        double v_prev = guard_ineq_min(g, prev);
        double v_next = guard_ineq_min(g, point);
        if (v_prev < 0.0 && v_next >= 0.0) {
          StepEvent ev = refine([&](const std::vector<double>& x) { return guard_ineq_min(g, x); },
                                t, t_next, prev, 1.0);
          ev.guard = static_cast<int>(gi);
          candidates.push_back(std::move(ev));
        } else if (v_prev >= 0.0) {
          StepEvent ev;  // already inside the guard region at the step start
          ev.time = t;
          ev.state = prev;
          ev.guard = static_cast<int>(gi);
          candidates.push_back(std::move(ev));
        }
      }
    }
    if (box_violation(mode, point) > options.domain_tol) {
      StepEvent ev = refine([&](const std::vector<double>& x) { return box_violation(mode, x); },
                            t, t_next, prev, 1.0);
      ev.guard = -1;
      candidates.push_back(std::move(ev));
    }

    if (!candidates.empty()) {
      // Earliest event wins; guard index breaks near-ties deterministically.
      std::sort(candidates.begin(), candidates.end(), [&](const StepEvent& a, const StepEvent& b) {
        if (std::abs(a.time - b.time) > options.guard_time_tol) return a.time < b.time;
        if (a.guard < 0 || b.guard < 0) return a.guard > b.guard;  // guards beat box exits
        return cm.guards[a.guard].edge_index < cm.guards[b.guard].edge_index;
      });
      const StepEvent& ev = candidates.front();
      set_state(ev.state);
      record(ev.time);
      if (ev.guard < 0) return {seg, -2};
      return {seg, cm.guards[ev.guard].edge_index};
    }

    t = t_next;
    record(t);
  }
  return {seg, -1};
}

Trajectory execute(const HybridModel& model, int mode0, std::span<const double> x0, uint64_t seed,
                   const SimOptions& options) {
  Trajectory traj;
  std::mt19937_64 rng(detail::splitmix64(seed));
  int mode_id = mode0;
  std::vector<double> x(x0.begin(), x0.end());
  double t = 0.0;

  for (int events = 0;; ++events) {
    if (events >= options.max_events) {
      traj.termination = Termination::StepLimit;
      break;
    }
    const Mode& mode = model.mode_by_id(mode_id);
    std::vector<double> theta(mode.theta_vars.size());
    for (size_t i = 0; i < theta.size(); ++i) {
      theta[i] = mode.theta_box[i].lo + (mode.theta_box[i].hi - mode.theta_box[i].lo) * u01(rng);
    }
    auto [seg, edge_index] = integrate_segment(model, mode_id, x, theta, t, options);
    traj.segments.push_back(seg);
    const std::vector<double>& last = seg.states.back();
    t = seg.times.back();
    x = last;

    if (edge_index == -1) {
      traj.termination = Termination::HorizonReached;
      break;
    }
    if (edge_index == -2) {
      traj.termination = Termination::LeftDomain;
      break;
    }
    const Edge& edge = model.edges.at(edge_index);
    const Mode& dst = model.mode_by_id(edge.to);
    std::vector<double> full(model.vars->size(), 0.0);
    for (size_t i = 0; i < mode.state_vars.size(); ++i) full[mode.state_vars[i]] = x[i];
    std::vector<double> post(dst.state_vars.size());
    for (size_t k = 0; k < post.size(); ++k) {
      post[k] = eval(edge.reset[k], std::span<const double>(full));
    }
    TrajectoryEvent ev;
    ev.time = t;
    ev.edge_index = edge_index;
    ev.pre_state = x;
    ev.post_state = post;
    traj.events.push_back(std::move(ev));
    mode_id = edge.to;
    x = post;
    if (box_violation(dst, [&] {
          std::vector<double> p(model.vars->size(), 0.0);
          for (size_t i = 0; i < dst.state_vars.size(); ++i) p[dst.state_vars[i]] = x[i];
          return p;
        }()) > options.domain_tol) {
      traj.termination = Termination::LeftDomain;
      break;
    }
    if (t >= model.horizon - 1e-15) {
      traj.termination = Termination::HorizonReached;
      break;
    }
  }
  traj.final_mode = mode_id;
  traj.final_state = x;
  return traj;
}

namespace {

// Membership of the eps-neighborhood (sup-norm) of the target set, probed on
// the 3^n lattice {x + eps*delta}.  delta = 0 is checked first.
bool near_target(const Mode& mode, std::span<const double> x, double eps,
                 const std::vector<CompiledPoly>& target_ineqs, std::vector<double>& scratch) {
  if (target_ineqs.empty()) return false;
  const size_t n = mode.state_vars.size();
  auto member_at = [&](std::span<const double> probe) {
    for (size_t i = 0; i < n; ++i) scratch[mode.state_vars[i]] = probe[i];
    for (const CompiledPoly& p : target_ineqs) {
      if (p.eval(scratch) < 0) return false;
    }
    return true;
  };
  std::vector<double> probe(x.begin(), x.end());
  if (member_at(probe)) return true;
  if (eps <= 0) return false;
  const int total = static_cast<int>(std::pow(3.0, static_cast<double>(n)));
  for (int code = 0; code < total; ++code) {
    int c = code;
    bool center = true;
    for (size_t i = 0; i < n; ++i) {
      int d = c % 3;
      c /= 3;
      probe[i] = x[i] + (d - 1) * eps;
      if (d != 1) center = false;
    }
    if (center) continue;
    if (member_at(probe)) return true;
  }
  return false;
}

bool trajectory_success(const HybridModel& model, const Trajectory& traj,
                        const SuccessSpec& spec,
                        const std::map<int, std::vector<CompiledPoly>>& targets,
                        std::vector<double>& scratch) {
  if (!spec.any_time) {
    if (traj.termination != Termination::HorizonReached) return false;
    const Mode& mode = model.mode_by_id(traj.final_mode);
    auto it = targets.find(traj.final_mode);
    if (it == targets.end()) return false;
    return near_target(mode, traj.final_state, spec.eps, it->second, scratch);
  }
  for (const TrajectorySegment& seg : traj.segments) {
    auto it = targets.find(seg.mode_id);
    if (it == targets.end()) continue;
    const Mode& mode = model.mode_by_id(seg.mode_id);
    for (const auto& state : seg.states) {
      if (near_target(mode, state, spec.eps, it->second, scratch)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<double> McReport::point(int index) const {
  std::vector<double> out(axes.size());
  int rem = index;
  for (int i = static_cast<int>(axes.size()) - 1; i >= 0; --i) {
    int n = static_cast<int>(axes[i].size());
    out[i] = axes[i][rem % n];
    rem /= n;
  }
  return out;
}

std::string McReport::to_csv() const {
  std::ostringstream os;
  for (const std::string& n : axis_names) os << n << ",";
  os << "trials,successes\n";
  char buf[40];
  for (int i = 0; i < point_count(); ++i) {
    for (double v : point(i)) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      os << buf << ",";
    }
    os << trials[i] << "," << successes[i] << "\n";
  }
  return os.str();
}

McReport monte_carlo(const HybridModel& model, const GridSpec& grid, int trials,
                     const SuccessSpec& success, uint64_t seed, int threads,
                     const SimOptions& options) {
  if (trials < 1) throw ModelError("monte_carlo: trials must be >= 1");
  const Mode& mode = model.mode_by_id(grid.mode_id);
  if (grid.points_per_axis.size() != mode.state_vars.size()) {
    throw ModelError("monte_carlo: grid dimension does not match the mode");
  }
  McReport report;
  report.mode_id = grid.mode_id;
  report.success = success;
  report.seed = seed;
  int total = 1;
  for (size_t i = 0; i < mode.state_vars.size(); ++i) {
    int n = grid.points_per_axis[i];
    if (n < 1) throw ModelError("monte_carlo: grid axis needs at least one point");
    report.axis_names.push_back(model.vars->name(mode.state_vars[i]));
    std::vector<double> axis(n);
    for (int k = 0; k < n; ++k) {
      axis[k] = n == 1 ? (mode.box[i].lo + mode.box[i].hi) / 2.0
                       : mode.box[i].lo + (mode.box[i].hi - mode.box[i].lo) * k / (n - 1);
    }
    report.axes.push_back(std::move(axis));
    total *= n;
  }
  report.trials.assign(total, trials);
  report.successes.assign(total, 0);

  std::map<int, std::vector<CompiledPoly>> targets;
  for (const Mode& m : model.modes) {
    if (!m.has_target) continue;
    std::vector<CompiledPoly> cp;
    for (const Polynomial& p : m.target.ineqs) cp.emplace_back(p);
    targets.emplace(m.id, std::move(cp));
  }

  const int nthreads = std::max(1, threads);
  std::atomic<int> next_point{0};
  auto worker = [&]() {
    std::vector<double> scratch(model.vars->size(), 0.0);
    while (true) {
      int idx = next_point.fetch_add(1);
      if (idx >= total) return;
      std::vector<double> x0 = report.point(idx);
      int ok = 0;
      for (int tr = 0; tr < trials; ++tr) {
        uint64_t s = detail::derive_seed(seed, static_cast<uint64_t>(idx),
                                         static_cast<uint64_t>(tr));
        Trajectory traj = execute(model, grid.mode_id, x0, s, options);
        if (trajectory_success(model, traj, success, targets, scratch)) ++ok;
      }
      report.successes[idx] = ok;
    }
  };
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

ContainmentVerdict check_containment(const McReport& report, const LevelSetGrid& grid,
                                     ContainmentDirection direction) {
  if (report.mode_id != grid.mode_id || report.axes.size() != grid.axes.size()) {
    throw ModelError("check_containment: grid shapes differ");
  }
  for (size_t i = 0; i < report.axes.size(); ++i) {
    if (report.axes[i].size() != grid.axes[i].size()) {
      throw ModelError("check_containment: axis sizes differ");
    }
    for (size_t k = 0; k < report.axes[i].size(); ++k) {
      if (std::abs(report.axes[i][k] - grid.axes[i][k]) > 1e-9) {
        throw ModelError("check_containment: axis values differ");
      }
    }
  }
  ContainmentVerdict verdict;
  for (int i = 0; i < report.point_count(); ++i) {
    if (direction == ContainmentDirection::OuterMustContain) {
      if (report.successes[i] == report.trials[i]) {
        ++verdict.checked;
        if (grid.values[i] < grid.threshold) {
          verdict.pass = false;
          verdict.violating_points.push_back(i);
        }
      }
    } else {
      if (grid.inside[i]) {
        ++verdict.checked;
        if (report.successes[i] != report.trials[i]) {
          verdict.pass = false;
          verdict.violating_points.push_back(i);
        }
      }
    }
  }
  return verdict;
}

std::string trajectory_to_csv(const HybridModel& model, const Trajectory& traj) {
  std::ostringstream os;
  os << "t,mode";
  for (int v = 0; v < model.vars->size(); ++v) {
    if (v == model.time_var) continue;
    os << "," << model.vars->name(v);
  }
  os << "\n";
  char buf[40];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    os << buf;
  };
  for (const TrajectorySegment& seg : traj.segments) {
    const Mode& mode = model.mode_by_id(seg.mode_id);
    std::vector<double> row(model.vars->size(), std::nan(""));
    for (size_t i = 0; i < mode.theta_vars.size(); ++i) row[mode.theta_vars[i]] = seg.theta[i];
    for (size_t k = 0; k < seg.times.size(); ++k) {
      for (size_t i = 0; i < mode.state_vars.size(); ++i) {
        row[mode.state_vars[i]] = seg.states[k][i];
      }
      emit(seg.times[k]);
      os << "," << seg.mode_id;
      for (int v = 0; v < model.vars->size(); ++v) {
        if (v == model.time_var) continue;
        os << ",";
        emit(row[v]);
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace ubrs
