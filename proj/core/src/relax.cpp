#include "ubrs/relax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace ubrs {

using nlohmann::ordered_json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Outer: return "outer";
    case Variant::OuterFreeTime: return "outer-free-time";
    case Variant::Inner: return "inner";
    case Variant::AlphaConfidence: return "alpha";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "outer") return Variant::Outer;
  if (s == "outer-free-time" || s == "free-time") return Variant::OuterFreeTime;
  if (s == "inner") return Variant::Inner;
  if (s == "alpha") return Variant::AlphaConfidence;
  throw ModelError("unknown variant '" + s + "'");
}

namespace {

void validate_options(const HybridModel& model, const RelaxOptions& opts) {
  if (opts.degree < 2 || opts.degree % 2 != 0) {
    throw ModelError("degree must be even and at least 2");
  }
  if (opts.variant == Variant::AlphaConfidence) {
    if (!(opts.alpha > 0.0 && opts.alpha <= 1.0)) throw ModelError("alpha must lie in (0, 1]");
    if (model.modes.size() != 1 || !model.edges.empty()) {
      throw ModelError("alpha variant requires single mode");
    }
  }
  int data_degree = 0;
  for (const Mode& m : model.modes) {
    for (const Polynomial& p : m.domain_extra.ineqs) data_degree = std::max(data_degree, p.degree());
    for (const Polynomial& p : m.target.ineqs) data_degree = std::max(data_degree, p.degree());
  }
  for (const Edge& e : model.edges) {
    for (const Polynomial& p : e.guard.ineqs) data_degree = std::max(data_degree, p.degree());
    for (const Polynomial& p : e.guard.eqs) data_degree = std::max(data_degree, p.degree());
  }
  if (opts.degree < data_degree) {
    throw ModelError("degree " + std::to_string(opts.degree) +
                     " is below the model data degree " + std::to_string(data_degree));
  }
}

struct Ctx {
  const HybridModel* norm = nullptr;
  SosProgram* prog = nullptr;
  int time_var = 0;

  Polynomial time_box() const {
    // that * (1 - that) >= 0 on the normalized horizon [0, 1].
    Polynomial t = Polynomial::variable(norm->vars, time_var);
    return t - mul(t, t);
  }
  Polynomial unit_box(int var) const {
    Polynomial x = Polynomial::variable(norm->vars, var);
    return Polynomial::constant(norm->vars, 1.0) - mul(x, x);
  }

  /// Set over [t +] states [+ thetas] with the box inequalities appended
  /// (they keep the quadratic module Archimedean).
  SetDescription make_set(const Mode& mode, bool with_time, bool with_theta,
                          const std::vector<Polynomial>& extra_ineqs,
                          const std::vector<Polynomial>& eqs = {}) const {
    SetDescription set;
    if (with_time) {
      set.vars.push_back(time_var);
      set.box.push_back(Interval{0.0, 1.0});
    }
    for (int v : mode.state_vars) {
      set.vars.push_back(v);
      set.box.push_back(Interval{-1.0, 1.0});
    }
    if (with_theta) {
      for (int v : mode.theta_vars) {
        set.vars.push_back(v);
        set.box.push_back(Interval{-1.0, 1.0});
      }
    }
    set.ineqs = extra_ineqs;
    if (with_time) set.ineqs.push_back(time_box());
    for (int v : mode.state_vars) set.ineqs.push_back(unit_box(v));
    if (with_theta) {
      for (int v : mode.theta_vars) set.ineqs.push_back(unit_box(v));
    }
    set.eqs = eqs;
    return set;
  }
};

std::vector<Polynomial> concat(const std::vector<Polynomial>& a, const std::vector<Polynomial>& b) {
  std::vector<Polynomial> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void add_objective(SosProgram& prog, const HybridModel& norm,
                   const std::vector<BuildResult::ModeDecisions>& decisions, int degree) {
  std::vector<std::pair<int, double>> terms;
  for (const auto& md : decisions) {
    const Mode& mode = norm.mode_by_id(md.mode_id);
    const DecisionPolynomial& w = prog.decision(md.w_id);
    std::vector<std::pair<double, double>> unit(mode.state_vars.size(), {-1.0, 1.0});
    std::vector<double> moments = lebesgue_moments(w.vars, unit, degree);
    for (int i = 0; i < w.slot_count(); ++i) {
      if (moments[i] != 0.0) terms.emplace_back(w.first_slot + i, moments[i]);
    }
  }
  prog.set_objective_min(std::move(terms));
}

// The reset substitution: destination state variable -> reset polynomial
// (identity in the time component).
std::map<int, Polynomial> reset_substitution(const Mode& dst, const Edge& edge) {
  std::map<int, Polynomial> subst;
  for (size_t k = 0; k < edge.reset.size(); ++k) subst.emplace(dst.state_vars[k], edge.reset[k]);
  return subst;
}

BuildResult build_common(const HybridModel& model, const RelaxOptions& opts) {
  validate_options(model, opts);
  BuildResult out;
  out.variant = opts.variant;
  out.degree = opts.degree;
  out.alpha = opts.alpha;
  auto [norm, scaling] = normalize(model);
  out.normalized = std::move(norm);
  out.scaling = std::move(scaling);
  return out;
}

void finish(BuildResult& out, SosProgram& prog) { out.problem = prog.assemble(); }

}  // namespace

BuildResult build_outer(const HybridModel& model, const RelaxOptions& opts) {
  BuildResult out = build_common(model, opts);
  const HybridModel& norm = out.normalized;
  const int d = opts.degree;

  bool any_target = false;
  for (const Mode& m : norm.modes) any_target |= m.has_target;
  if (!any_target) throw ModelError("empty target union: no mode declares a target set");

  SosProgram prog(norm.vars);
  Ctx ctx{&norm, &prog, norm.time_var};

  for (const Mode& mode : norm.modes) {
    BuildResult::ModeDecisions md;
    md.mode_id = mode.id;
    md.w_id = prog.declare("w_" + std::to_string(mode.id), mode.state_vars, d);
    std::vector<int> v_vars{norm.time_var};
    v_vars.insert(v_vars.end(), mode.state_vars.begin(), mode.state_vars.end());
    v_vars.insert(v_vars.end(), mode.theta_vars.begin(), mode.theta_vars.end());
    md.v_id = prog.declare("v_" + std::to_string(mode.id), v_vars, d);
    out.mode_decisions.push_back(md);
  }
  out.q_id = prog.declare("q", {}, 0);
  // (v, q) -> (v + c, q - c) leaves every constraint of this variant
  // unchanged, so q is pure gauge; pin it to keep the rows full rank.
  prog.pin_slot(prog.decision(out.q_id).first_slot);
  const AffinePolyExpr q = prog.expr(out.q_id);
  const AffinePolyExpr one = AffinePolyExpr::from_poly(Polynomial::constant(norm.vars, 1.0));

  for (size_t mi = 0; mi < norm.modes.size(); ++mi) {
    const Mode& mode = norm.modes[mi];
    const auto& md = out.mode_decisions[mi];
    const AffinePolyExpr w = prog.expr(md.w_id);
    const AffinePolyExpr v = prog.expr(md.v_id);
    const std::string tag = "mode" + std::to_string(mode.id);

    // (i) w_j must dominate the zero function on the domain.
    prog.require_in_quadratic_module(w, ctx.make_set(mode, false, false, mode.domain_extra.ineqs),
                                     d, tag + ":w-nonneg");

    // (ii) terminal support: v_j(T,.) + q >= 0 on the target (time substituted).
    if (mode.has_target) {
      std::map<int, Polynomial> at_T{{norm.time_var, Polynomial::constant(norm.vars, 1.0)}};
      AffinePolyExpr vT = v.composed(at_T);
      prog.require_in_quadratic_module(
          vT + q,
          ctx.make_set(mode, false, true, concat(mode.target.ineqs, mode.domain_extra.ineqs)), d,
          tag + ":terminal");
    }

    // (iii) v_j decreases along every admissible flow.
    AffinePolyExpr lv = lie_derivative(v, mode.state_vars, mode.dynamics, norm.time_var);
    prog.require_in_quadratic_module(-lv, ctx.make_set(mode, true, true, mode.domain_extra.ineqs),
                                     d, tag + ":flow");

    // (iv) initial support: w_j >= 1 + q + <mu_th, v_j(0, x, .)>.
    std::map<int, Polynomial> at_0{{norm.time_var, Polynomial::constant(norm.vars, 0.0)}};
    AffinePolyExpr v0 = v.composed(at_0);
    if (!mode.theta_vars.empty()) v0 = v0.theta_averaged(mode.theta_dist);
    prog.require_in_quadratic_module(
        w - v0 - q - one, ctx.make_set(mode, false, false, mode.domain_extra.ineqs), d,
        tag + ":initial");
  }

  // (v) guard coupling: v_j dominates the theta-averaged v_k after the reset.
  for (size_t ei = 0; ei < norm.edges.size(); ++ei) {
    const Edge& edge = norm.edges[ei];
    const Mode& src = norm.mode_by_id(edge.from);
    const Mode& dst = norm.mode_by_id(edge.to);
    int src_idx = norm.mode_index(edge.from);
    int dst_idx = norm.mode_index(edge.to);
    AffinePolyExpr vj = prog.expr(out.mode_decisions[src_idx].v_id);
    AffinePolyExpr vk = prog.expr(out.mode_decisions[dst_idx].v_id);
    if (!dst.theta_vars.empty()) vk = vk.theta_averaged(dst.theta_dist);
    AffinePolyExpr vk_reset = vk.composed(reset_substitution(dst, edge));
    prog.require_in_quadratic_module(
        vj - vk_reset,
        ctx.make_set(src, true, true, concat(edge.guard.ineqs, src.domain_extra.ineqs),
                     edge.guard.eqs),
        opts.degree, "edge" + std::to_string(ei) + ":guard");
  }

  add_objective(prog, norm, out.mode_decisions, d);
  finish(out, prog);
  return out;
}

BuildResult build_free_time(const HybridModel& model, const RelaxOptions& opts) {
  BuildResult out = build_common(model, opts);
  const HybridModel& norm = out.normalized;
  const int d = opts.degree;

  bool any_target = false;
  for (const Mode& m : norm.modes) any_target |= m.has_target;
  if (!any_target) throw ModelError("empty target union: no mode declares a target set");

  SosProgram prog(norm.vars);
  Ctx ctx{&norm, &prog, norm.time_var};

  for (const Mode& mode : norm.modes) {
    BuildResult::ModeDecisions md;
    md.mode_id = mode.id;
    md.w_id = prog.declare("w_" + std::to_string(mode.id), mode.state_vars, d);
    std::vector<int> v_vars{norm.time_var};
    v_vars.insert(v_vars.end(), mode.state_vars.begin(), mode.state_vars.end());
    v_vars.insert(v_vars.end(), mode.theta_vars.begin(), mode.theta_vars.end());
    md.v_id = prog.declare("v_" + std::to_string(mode.id), v_vars, d);
    out.mode_decisions.push_back(md);
  }
  out.q_id = prog.declare("q", {}, 0);
  // (v, q) -> (v + c, q - c) leaves every constraint of this variant
  // unchanged, so q is pure gauge; pin it to keep the rows full rank.
  prog.pin_slot(prog.decision(out.q_id).first_slot);
  const AffinePolyExpr q = prog.expr(out.q_id);
  const AffinePolyExpr one = AffinePolyExpr::from_poly(Polynomial::constant(norm.vars, 1.0));

  for (size_t mi = 0; mi < norm.modes.size(); ++mi) {
    const Mode& mode = norm.modes[mi];
    const auto& md = out.mode_decisions[mi];
    const AffinePolyExpr w = prog.expr(md.w_id);
    const AffinePolyExpr v = prog.expr(md.v_id);
    const std::string tag = "mode" + std::to_string(mode.id);

    prog.require_in_quadratic_module(w, ctx.make_set(mode, false, false, mode.domain_extra.ineqs),
                                     d, tag + ":w-nonneg");

    // Terminal measure lives on [0,1] x X_T x Theta here: time stays free.
    if (mode.has_target) {
      prog.require_in_quadratic_module(
          v + q,
          ctx.make_set(mode, true, true, concat(mode.target.ineqs, mode.domain_extra.ineqs)), d,
          tag + ":terminal-anytime");
    }

    AffinePolyExpr lv = lie_derivative(v, mode.state_vars, mode.dynamics, norm.time_var);
    prog.require_in_quadratic_module(-lv, ctx.make_set(mode, true, true, mode.domain_extra.ineqs),
                                     d, tag + ":flow");

    std::map<int, Polynomial> at_0{{norm.time_var, Polynomial::constant(norm.vars, 0.0)}};
    AffinePolyExpr v0 = v.composed(at_0);
    if (!mode.theta_vars.empty()) v0 = v0.theta_averaged(mode.theta_dist);
    prog.require_in_quadratic_module(
        w - v0 - q - one, ctx.make_set(mode, false, false, mode.domain_extra.ineqs), d,
        tag + ":initial");
  }

  for (size_t ei = 0; ei < norm.edges.size(); ++ei) {
    const Edge& edge = norm.edges[ei];
    const Mode& src = norm.mode_by_id(edge.from);
    const Mode& dst = norm.mode_by_id(edge.to);
    AffinePolyExpr vj = prog.expr(out.mode_decisions[norm.mode_index(edge.from)].v_id);
    AffinePolyExpr vk = prog.expr(out.mode_decisions[norm.mode_index(edge.to)].v_id);
    if (!dst.theta_vars.empty()) vk = vk.theta_averaged(dst.theta_dist);
    AffinePolyExpr vk_reset = vk.composed(reset_substitution(dst, edge));
    prog.require_in_quadratic_module(
        vj - vk_reset,
        ctx.make_set(src, true, true, concat(edge.guard.ineqs, src.domain_extra.ineqs),
                     edge.guard.eqs),
        opts.degree, "edge" + std::to_string(ei) + ":guard");
  }

  add_objective(prog, norm, out.mode_decisions, d);
  finish(out, prog);
  return out;
}

namespace {
// True when the guard equality pins the normalized facet xhat_i = side.
bool guard_covers_facet(const Edge& edge, int var, double side) {
  for (const Polynomial& g : edge.guard.eqs) {
    const auto& terms = g.terms();
    if (terms.empty() || terms.size() > 2) continue;
    double lin = 0.0, cst = 0.0;
    bool other = false;
    for (const auto& [m, c] : terms) {
      if (m.is_constant()) {
        cst = c;
      } else if (m.degree() == 1 && m.exponent(var) == 1) {
        lin = c;
      } else {
        other = true;
      }
    }
    if (other || lin == 0.0) continue;
    if (std::abs(cst / lin + side) < 1e-9) return true;  // g = lin*(x - side*?) ... x = -cst/lin
  }
  return false;
}
}  // namespace

BuildResult build_inner(const HybridModel& model, const RelaxOptions& opts) {
  BuildResult out = build_common(model, opts);
  const HybridModel& norm = out.normalized;
  const int d = opts.degree;

  SosProgram prog(norm.vars);
  Ctx ctx{&norm, &prog, norm.time_var};

  for (const Mode& mode : norm.modes) {
    BuildResult::ModeDecisions md;
    md.mode_id = mode.id;
    md.w_id = prog.declare("w_" + std::to_string(mode.id), mode.state_vars, d);
    // Uncertainty is an adversarial input here: v depends on (t, x) only.
    std::vector<int> v_vars{norm.time_var};
    v_vars.insert(v_vars.end(), mode.state_vars.begin(), mode.state_vars.end());
    md.v_id = prog.declare("v_" + std::to_string(mode.id), v_vars, d);
    out.mode_decisions.push_back(md);
  }
  out.q_id = prog.declare("q", {}, 0);
  // (v, q) -> (v + c, q - c) leaves every constraint of this variant
  // unchanged, so q is pure gauge; pin it to keep the rows full rank.
  prog.pin_slot(prog.decision(out.q_id).first_slot);
  const AffinePolyExpr q = prog.expr(out.q_id);
  const AffinePolyExpr one = AffinePolyExpr::from_poly(Polynomial::constant(norm.vars, 1.0));

  for (size_t mi = 0; mi < norm.modes.size(); ++mi) {
    const Mode& mode = norm.modes[mi];
    const auto& md = out.mode_decisions[mi];
    const AffinePolyExpr w = prog.expr(md.w_id);
    const AffinePolyExpr v = prog.expr(md.v_id);
    const std::string tag = "mode" + std::to_string(mode.id);

    // (i) pairs with the slack of the initial-measure constraint.
    prog.require_in_quadratic_module(w, ctx.make_set(mode, false, false, mode.domain_extra.ineqs),
                                     d, tag + ":w-nonneg");

    // (ii) terminal failure measure on closure(D \ X_T): one certified piece
    // per target inequality ({-g_i >= 0} within the box), the whole domain
    // when the mode has no target.
    std::map<int, Polynomial> at_T{{norm.time_var, Polynomial::constant(norm.vars, 1.0)}};
    AffinePolyExpr vT = v.composed(at_T);
    if (mode.has_target) {
      for (size_t i = 0; i < mode.target.ineqs.size(); ++i) {
        std::vector<Polynomial> piece = mode.domain_extra.ineqs;
        piece.push_back(-mode.target.ineqs[i]);
        prog.require_in_quadratic_module(vT + q, ctx.make_set(mode, false, false, piece), d,
                                         tag + ":terminal-miss" + std::to_string(i));
      }
    } else {
      prog.require_in_quadratic_module(
          vT + q, ctx.make_set(mode, false, false, mode.domain_extra.ineqs), d,
          tag + ":terminal-miss");
    }

    // (iii) the flow constraint quantifies over every theta in the box.
    AffinePolyExpr lv = lie_derivative(v, mode.state_vars, mode.dynamics, norm.time_var);
    prog.require_in_quadratic_module(-lv, ctx.make_set(mode, true, true, mode.domain_extra.ineqs),
                                     d, tag + ":flow");

    // (iv) boundary trap: leaving through a guard-free facet is a failure.
    for (size_t i = 0; i < mode.state_vars.size(); ++i) {
      for (double side : {-1.0, 1.0}) {
        bool covered = false;
        for (const Edge& e : norm.edges) {
          if (e.from == mode.id && guard_covers_facet(e, mode.state_vars[i], side)) covered = true;
        }
        if (covered) continue;
        std::map<int, Polynomial> on_facet{
            {mode.state_vars[i], Polynomial::constant(norm.vars, side)}};
        AffinePolyExpr v_facet = v.composed(on_facet);
        SetDescription set;
        set.vars.push_back(norm.time_var);
        set.box.push_back(Interval{0.0, 1.0});
        set.ineqs.push_back(ctx.time_box());
        for (size_t k = 0; k < mode.state_vars.size(); ++k) {
          if (k == i) continue;
          set.vars.push_back(mode.state_vars[k]);
          set.box.push_back(Interval{-1.0, 1.0});
          set.ineqs.push_back(ctx.unit_box(mode.state_vars[k]));
        }
        for (const Polynomial& p : mode.domain_extra.ineqs) {
          set.ineqs.push_back(compose(p, on_facet));
        }
        prog.require_in_quadratic_module(
            v_facet + q, set, d,
            tag + ":boundary" + std::string(side > 0 ? "+" : "-") +
                norm.vars->name(mode.state_vars[i]));
      }
    }

    // (v) initial support of the failure set.
    std::map<int, Polynomial> at_0{{norm.time_var, Polynomial::constant(norm.vars, 0.0)}};
    AffinePolyExpr v0 = v.composed(at_0);
    prog.require_in_quadratic_module(
        w - v0 - q - one, ctx.make_set(mode, false, false, mode.domain_extra.ineqs), d,
        tag + ":initial");
  }

  for (size_t ei = 0; ei < norm.edges.size(); ++ei) {
    const Edge& edge = norm.edges[ei];
    const Mode& src = norm.mode_by_id(edge.from);
    const Mode& dst = norm.mode_by_id(edge.to);
    AffinePolyExpr vj = prog.expr(out.mode_decisions[norm.mode_index(edge.from)].v_id);
    AffinePolyExpr vk = prog.expr(out.mode_decisions[norm.mode_index(edge.to)].v_id);
    AffinePolyExpr vk_reset = vk.composed(reset_substitution(dst, edge));
    prog.require_in_quadratic_module(
        vj - vk_reset,
        ctx.make_set(src, true, true, concat(edge.guard.ineqs, src.domain_extra.ineqs),
                     edge.guard.eqs),
        opts.degree, "edge" + std::to_string(ei) + ":guard");
  }

  add_objective(prog, norm, out.mode_decisions, d);
  finish(out, prog);
  return out;
}

BuildResult build_alpha(const HybridModel& model, const RelaxOptions& opts) {
  BuildResult out = build_common(model, opts);
  const HybridModel& norm = out.normalized;
  const int d = opts.degree;
  const double alpha = opts.alpha;
  const Mode& mode = norm.modes.front();
  if (!mode.has_target) throw ModelError("alpha variant requires a target set");

  SosProgram prog(norm.vars);
  Ctx ctx{&norm, &prog, norm.time_var};

  BuildResult::ModeDecisions md;
  md.mode_id = mode.id;
  md.w_id = prog.declare("w_" + std::to_string(mode.id), mode.state_vars, d);
  std::vector<int> v_vars{norm.time_var};
  v_vars.insert(v_vars.end(), mode.state_vars.begin(), mode.state_vars.end());
  v_vars.insert(v_vars.end(), mode.theta_vars.begin(), mode.theta_vars.end());
  md.v_id = prog.declare("v_" + std::to_string(mode.id), v_vars, d);
  out.mode_decisions.push_back(md);
  out.q_id = prog.declare("q", {}, 0);

  const AffinePolyExpr w = prog.expr(md.w_id);
  const AffinePolyExpr v = prog.expr(md.v_id);
  const AffinePolyExpr q = prog.expr(out.q_id);
  const AffinePolyExpr one = AffinePolyExpr::from_poly(Polynomial::constant(norm.vars, 1.0));
  const std::string tag = "mode" + std::to_string(mode.id);

  prog.require_in_quadratic_module(w, ctx.make_set(mode, false, false, mode.domain_extra.ineqs), d,
                                   tag + ":w-nonneg");

  std::map<int, Polynomial> at_T{{norm.time_var, Polynomial::constant(norm.vars, 1.0)}};
  AffinePolyExpr vT = v.composed(at_T);
  // On-target terminal mass carries weight alpha - 1, off-target mass alpha.
  prog.require_in_quadratic_module(
      vT + q.scaled(alpha - 1.0),
      ctx.make_set(mode, false, true, concat(mode.target.ineqs, mode.domain_extra.ineqs)), d,
      tag + ":terminal-hit");
  for (size_t i = 0; i < mode.target.ineqs.size(); ++i) {
    std::vector<Polynomial> piece = mode.domain_extra.ineqs;
    piece.push_back(-mode.target.ineqs[i]);
    prog.require_in_quadratic_module(vT + q.scaled(alpha), ctx.make_set(mode, false, true, piece),
                                     d, tag + ":terminal-miss" + std::to_string(i));
  }

  AffinePolyExpr lv = lie_derivative(v, mode.state_vars, mode.dynamics, norm.time_var);
  prog.require_in_quadratic_module(-lv, ctx.make_set(mode, true, true, mode.domain_extra.ineqs), d,
                                   tag + ":flow");

  std::map<int, Polynomial> at_0{{norm.time_var, Polynomial::constant(norm.vars, 0.0)}};
  AffinePolyExpr v0 = v.composed(at_0);
  if (!mode.theta_vars.empty()) v0 = v0.theta_averaged(mode.theta_dist);
  prog.require_in_quadratic_module(w - one - v0,
                                   ctx.make_set(mode, false, false, mode.domain_extra.ineqs), d,
                                   tag + ":initial");

  // q >= 0 as a one-by-one psd block.
  SetDescription trivial;
  prog.require_in_quadratic_module(q, trivial, 0, "q-sign");

  add_objective(prog, norm, out.mode_decisions, d);
  finish(out, prog);
  return out;
}

BuildResult build(const HybridModel& model, const RelaxOptions& opts) {
  switch (opts.variant) {
    case Variant::Outer: return build_outer(model, opts);
    case Variant::OuterFreeTime: return build_free_time(model, opts);
    case Variant::Inner: return build_inner(model, opts);
    case Variant::AlphaConfidence: return build_alpha(model, opts);
  }
  throw ModelError("unknown variant");
}

SdpProblem with_objective_cap(const SdpProblem& p, double cap) {
  SdpProblem out = p;
  GramBlockInfo slack;
  slack.constraint = -1;
  slack.multiplier = 0;
  slack.weight = Polynomial::constant(p.vars, 1.0);
  slack.basis = {Polynomial::constant(p.vars, 1.0)};
  const int gi = static_cast<int>(out.grams.size());
  out.grams.push_back(std::move(slack));
  EqRow cap_row;
  cap_row.constraint = -1;
  cap_row.rhs = cap - p.objective_constant;
  cap_row.slot_terms = p.objective;
  cap_row.gram_terms.push_back(SdpEntry{gi, 0, 0, 1.0});
  out.rows.push_back(std::move(cap_row));
  out.objective.clear();
  out.objective_constant = 0.0;
  return out;
}

RelaxationSolution solve_relaxation(const BuildResult& build, const SolverOptions& opts) {
  RelaxationSolution out;
  out.problem = build.problem;
  out.conv = to_standard_form(build.problem);
  out.sol = solve(out.conv.form, opts);
  out.optimize_status = out.sol.status;
  out.objective_bound = out.conv.objective_value(out.sol);
  if (out.sol.status != SolveStatus::SlowProgress && out.sol.status != SolveStatus::IterLimit) {
    return out;
  }
  // Interior re-solve at a slightly relaxed objective level.  Minimizing the
  // total Gram trace under the cap gives a problem with strictly feasible
  // dual (S = I at y = 0), which the interior-point method solves cleanly.
  const double cap =
      out.objective_bound + 2e-2 * (1.0 + std::abs(out.objective_bound));
  SdpProblem capped = with_objective_cap(build.problem, cap);
  SdpConversion conv2 = to_standard_form(capped);
  conv2.form.c_entries.clear();
  for (size_t l = 0; l < conv2.form.blocks.size(); ++l) {
    for (int i = 0; i < conv2.form.blocks[l].size; ++i) {
      conv2.form.c_entries.push_back(SdpEntry{static_cast<int>(l), i, i, -1.0});
    }
  }
  SdpSolution sol2 = solve(conv2.form, opts);
  if (sol2.status == SolveStatus::Optimal) {
    out.problem = std::move(capped);
    out.conv = std::move(conv2);
    out.sol = std::move(sol2);
    out.recentered = true;
  }
  return out;
}

const ModeCertificate& Certificate::mode(int id) const {
  for (const ModeCertificate& m : modes) {
    if (m.mode_id == id) return m;
  }
  throw ModelError("certificate has no mode " + std::to_string(id));
}

Certificate extract(const BuildResult& build, const RelaxationSolution& solution) {
  const SdpSolution& sol = solution.sol;
  if (sol.status == SolveStatus::Infeasible || sol.status == SolveStatus::Unbounded) {
    throw SolverError("cannot extract a certificate from status " + to_string(sol.status));
  }
  Certificate cert;
  cert.variant = build.variant;
  cert.degree = build.degree;
  cert.alpha = build.alpha;
  cert.status = solution.optimize_status;

  const std::vector<double> slots = solution.conv.slot_values(sol);
  // The certificate's own objective: Lebesgue pairing of its w coefficients.
  double obj = build.problem.objective_constant;
  for (const auto& [slot, c] : build.problem.objective) obj += c * slots[slot];
  cert.objective = obj;
  if (build.q_id >= 0) {
    cert.q = slots[build.problem.decision(build.q_id).first_slot];
  }
  if (build.variant == Variant::AlphaConfidence) {
    cert.tau1 = 1.0 + cert.q * (1.0 - build.alpha);
    cert.tau2 = 1.0 - cert.q * build.alpha;
  }

  for (const auto& md : build.mode_decisions) {
    const Mode& mode = build.normalized.mode_by_id(md.mode_id);
    const auto& ms = build.scaling.for_mode(md.mode_id);
    ModeCertificate mc;
    mc.mode_id = md.mode_id;
    for (int v : mode.state_vars) mc.state_names.push_back(build.normalized.vars->name(v));
    for (const AffineVarMap& m : ms.state_maps) {
      mc.box.push_back(Interval{m.offset - m.scale, m.offset + m.scale});
    }
    Polynomial w_hat = reconstruct(solution.problem, md.w_id, slots);
    Polynomial v_hat = reconstruct(solution.problem, md.v_id, slots);
    // xhat = (x - m)/c per state/theta variable, that = t/T.
    std::vector<AffineVarMap> inv = build.scaling.inverse_state_maps(md.mode_id);
    std::vector<AffineVarMap> inv_theta = build.scaling.inverse_theta_maps(md.mode_id);
    mc.w = affine_rescale(w_hat, inv);
    inv.insert(inv.end(), inv_theta.begin(), inv_theta.end());
    inv.push_back(AffineVarMap{build.normalized.time_var, 1.0 / build.scaling.horizon, 0.0});
    mc.v = affine_rescale(v_hat, inv);
    for (int v : mode.theta_vars) mc.theta_names.push_back(build.normalized.vars->name(v));
    cert.modes.push_back(std::move(mc));
  }
  return cert;
}

std::string certificate_to_json(const Certificate& cert) {
  ordered_json j;
  j["variant"] = to_string(cert.variant);
  j["degree"] = cert.degree;
  if (cert.variant == Variant::AlphaConfidence) {
    j["alpha"] = cert.alpha;
    j["tau1"] = cert.tau1;
    j["tau2"] = cert.tau2;
  }
  j["status"] = to_string(cert.status);
  j["objective"] = cert.objective;
  j["q"] = cert.q;
  j["modes"] = ordered_json::array();
  for (const ModeCertificate& mc : cert.modes) {
    ordered_json jm;
    jm["id"] = mc.mode_id;
    jm["states"] = mc.state_names;
    ordered_json box = ordered_json::array();
    for (const Interval& iv : mc.box) box.push_back({iv.lo, iv.hi});
    jm["box"] = box;
    if (!mc.theta_names.empty()) jm["thetas"] = mc.theta_names;
    jm["w"] = to_string(mc.w);
    jm["v"] = to_string(mc.v);
    j["modes"].push_back(jm);
  }
  return j.dump(2) + "\n";
}

Certificate certificate_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("certificate is not valid JSON: ") + e.what());
  }
  Certificate cert;
  try {
    cert.variant = variant_from_string(j.at("variant").get<std::string>());
    cert.degree = j.at("degree").get<int>();
    if (j.contains("alpha")) cert.alpha = j.at("alpha").get<double>();
    if (j.contains("tau1")) cert.tau1 = j.at("tau1").get<double>();
    if (j.contains("tau2")) cert.tau2 = j.at("tau2").get<double>();
    const std::string st = j.at("status").get<std::string>();
    for (SolveStatus s : {SolveStatus::Optimal, SolveStatus::Infeasible, SolveStatus::Unbounded,
                          SolveStatus::SlowProgress, SolveStatus::IterLimit}) {
      if (to_string(s) == st) cert.status = s;
    }
    cert.objective = j.at("objective").get<double>();
    cert.q = j.at("q").get<double>();

    std::vector<std::string> names{"t"};
    for (const auto& jm : j.at("modes")) {
      for (const auto& s : jm.at("states")) {
        std::string n = s.get<std::string>();
        if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
      }
      if (jm.contains("thetas")) {
        for (const auto& s : jm.at("thetas")) {
          std::string n = s.get<std::string>();
          if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
        }
      }
    }
    VarSpacePtr vars = make_varspace(names);
    for (const auto& jm : j.at("modes")) {
      ModeCertificate mc;
      mc.mode_id = jm.at("id").get<int>();
      for (const auto& s : jm.at("states")) mc.state_names.push_back(s.get<std::string>());
      for (const auto& b : jm.at("box")) {
        mc.box.push_back(Interval{b.at(0).get<double>(), b.at(1).get<double>()});
      }
      if (jm.contains("thetas")) {
        for (const auto& s : jm.at("thetas")) mc.theta_names.push_back(s.get<std::string>());
      }
      mc.w = parse_polynomial(jm.at("w").get<std::string>(), vars);
      mc.v = parse_polynomial(jm.at("v").get<std::string>(), vars);
      cert.modes.push_back(std::move(mc));
    }
  } catch (const ordered_json::exception& e) {
    throw IoError(std::string("malformed certificate: ") + e.what());
  }
  return cert;
}

std::vector<double> LevelSetGrid::point(int index) const {
  std::vector<double> out(axes.size());
  int rem = index;
  for (int i = static_cast<int>(axes.size()) - 1; i >= 0; --i) {
    int n = static_cast<int>(axes[i].size());
    out[i] = axes[i][rem % n];
    rem /= n;
  }
  return out;
}

std::string LevelSetGrid::to_csv() const {
  std::ostringstream os;
  for (const std::string& n : axis_names) os << n << ",";
  os << "w,";
  if (variant == Variant::AlphaConfidence) {
    os << "in_S1,in_S2\n";
  } else {
    os << "inside\n";
  }
  char buf[40];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    os << buf;
  };
  for (size_t i = 0; i < values.size(); ++i) {
    for (double v : point(static_cast<int>(i))) {
      emit(v);
      os << ",";
    }
    emit(values[i]);
    if (variant == Variant::AlphaConfidence) {
      os << "," << int(in_s1[i]) << "," << int(in_s2[i]) << "\n";
    } else {
      os << "," << int(inside[i]) << "\n";
    }
  }
  return os.str();
}

LevelSetGrid sample_levelset(const Certificate& cert, int mode_id,
                             const std::vector<int>& points_per_axis) {
  const ModeCertificate& mc = cert.mode(mode_id);
  if (points_per_axis.size() != mc.box.size()) {
    throw ModelError("sample_levelset: grid dimension does not match the mode");
  }
  LevelSetGrid grid;
  grid.mode_id = mode_id;
  grid.variant = cert.variant;
  grid.axis_names = mc.state_names;
  grid.threshold = cert.variant == Variant::AlphaConfidence ? cert.tau1 : 1.0;
  int total = 1;
  for (size_t i = 0; i < mc.box.size(); ++i) {
    int n = points_per_axis[i];
    if (n < 1) throw ModelError("sample_levelset: grid axis needs at least one point");
    std::vector<double> axis(n);
    for (int k = 0; k < n; ++k) {
      axis[k] = n == 1 ? (mc.box[i].lo + mc.box[i].hi) / 2.0
                       : mc.box[i].lo + (mc.box[i].hi - mc.box[i].lo) * k / (n - 1);
    }
    grid.axes.push_back(std::move(axis));
    total *= n;
  }
  const VarSpacePtr& vars = mc.w.varspace();
  std::vector<double> full(vars->size(), 0.0);
  std::vector<int> state_ids;
  for (const std::string& n : mc.state_names) state_ids.push_back(vars->require(n));
  grid.values.resize(total);
  grid.inside.resize(total);
  if (cert.variant == Variant::AlphaConfidence) {
    grid.in_s1.resize(total);
    grid.in_s2.resize(total);
  }
  for (int idx = 0; idx < total; ++idx) {
    std::vector<double> x = grid.point(idx);
    for (size_t i = 0; i < state_ids.size(); ++i) full[state_ids[i]] = x[i];
    double wv = eval(mc.w, std::span<const double>(full));
    grid.values[idx] = wv;
    switch (cert.variant) {
      case Variant::Outer:
      case Variant::OuterFreeTime:
        grid.inside[idx] = wv >= 1.0;
        break;
      case Variant::Inner:
        grid.inside[idx] = wv < 1.0;  // complement of the failure superlevel set
        break;
      case Variant::AlphaConfidence:
        grid.in_s1[idx] = wv >= cert.tau1;
        grid.in_s2[idx] = wv >= cert.tau2;
        grid.inside[idx] = grid.in_s1[idx];
        break;
    }
  }
  return grid;
}

}  // namespace ubrs
