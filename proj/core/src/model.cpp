#include "ubrs/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace ubrs {

using nlohmann::ordered_json;

const Mode& HybridModel::mode_by_id(int id) const {
  for (const Mode& m : modes) {
    if (m.id == id) return m;
  }
  throw ModelError("unknown mode id " + std::to_string(id));
}

int HybridModel::mode_index(int id) const {
  for (size_t i = 0; i < modes.size(); ++i) {
    if (modes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

const ScalingMap::ModeScaling& ScalingMap::for_mode(int id) const {
  for (const auto& m : modes) {
    if (m.mode_id == id) return m;
  }
  throw ModelError("scaling map has no mode " + std::to_string(id));
}

namespace {
std::vector<AffineVarMap> invert_maps(const std::vector<AffineVarMap>& maps) {
  std::vector<AffineVarMap> inv;
  inv.reserve(maps.size());
  for (const AffineVarMap& m : maps) {
    inv.push_back(AffineVarMap{m.var, 1.0 / m.scale, -m.offset / m.scale});
  }
  return inv;
}
}  // namespace

std::vector<AffineVarMap> ScalingMap::inverse_state_maps(int mode_id) const {
  return invert_maps(for_mode(mode_id).state_maps);
}

std::vector<AffineVarMap> ScalingMap::inverse_theta_maps(int mode_id) const {
  return invert_maps(for_mode(mode_id).theta_maps);
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ModelError(path + ": " + what);
}

const ordered_json& expect(const ordered_json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path, "missing field '" + key + "'");
  return j.at(key);
}

std::vector<Interval> parse_box(const ordered_json& j, const std::string& path, size_t want) {
  if (!j.is_array()) fail(path, "expected an array of [lo,hi] pairs");
  if (j.size() != want) {
    fail(path, "expected " + std::to_string(want) + " intervals, got " + std::to_string(j.size()));
  }
  std::vector<Interval> out;
  for (size_t i = 0; i < j.size(); ++i) {
    const auto& e = j.at(i);
    if (!e.is_array() || e.size() != 2 || !e.at(0).is_number() || !e.at(1).is_number()) {
      fail(path + "[" + std::to_string(i) + "]", "expected [lo, hi]");
    }
    Interval iv{e.at(0).get<double>(), e.at(1).get<double>()};
    if (!(iv.lo < iv.hi)) fail(path + "[" + std::to_string(i) + "]", "requires lo < hi");
    out.push_back(iv);
  }
  return out;
}

std::vector<Polynomial> parse_polys(const ordered_json& j, const VarSpacePtr& vars,
                                    const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of polynomial strings");
  std::vector<Polynomial> out;
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j.at(i).is_string()) fail(path + "[" + std::to_string(i) + "]", "expected a string");
    try {
      out.push_back(parse_polynomial(j.at(i).get<std::string>(), vars));
    } catch (const ParseError& e) {
      fail(path + "[" + std::to_string(i) + "]", e.what());
    }
  }
  return out;
}

void check_vars_in(const Polynomial& p, const std::vector<int>& allowed, const VarSpacePtr& vars,
                   const std::string& path) {
  for (int v : p.support()) {
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      fail(path, "variable '" + vars->name(v) + "' is not available here");
    }
  }
}

}  // namespace

HybridModel load_model_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ModelError(std::string("model is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ModelError("model document must be a JSON object");

  HybridModel model;
  model.name = expect(j, "name", "$").get<std::string>();
  if (j.contains("description")) model.description = j.at("description").get<std::string>();
  model.horizon = expect(j, "horizon", "$").get<double>();
  if (!(model.horizon > 0)) fail("$.horizon", "must be positive");

  const auto& jmodes = expect(j, "modes", "$");
  if (!jmodes.is_array() || jmodes.empty()) fail("$.modes", "expected a nonempty array");

  // Collect the variable space: time first, then each name at first occurrence.
  std::vector<std::string> names{"t"};
  auto add_name = [&](const std::string& n, const std::string& path) {
    if (n == "t") fail(path, "'t' is reserved for time");
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  };
  for (size_t mi = 0; mi < jmodes.size(); ++mi) {
    const std::string mp = "$.modes[" + std::to_string(mi) + "]";
    const auto& jm = jmodes.at(mi);
    for (const auto& s : expect(jm, "states", mp)) add_name(s.get<std::string>(), mp + ".states");
    if (jm.contains("theta")) {
      for (const auto& s : expect(jm.at("theta"), "vars", mp + ".theta")) {
        add_name(s.get<std::string>(), mp + ".theta.vars");
      }
    }
  }
  model.vars = make_varspace(names);
  model.time_var = 0;

  for (size_t mi = 0; mi < jmodes.size(); ++mi) {
    const std::string mp = "$.modes[" + std::to_string(mi) + "]";
    const auto& jm = jmodes.at(mi);
    Mode mode;
    mode.id = expect(jm, "id", mp).get<int>();
    if (model.mode_index(mode.id) >= 0) fail(mp + ".id", "duplicate mode id");
    for (const auto& s : jm.at("states")) mode.state_vars.push_back(model.vars->require(s.get<std::string>()));
    if (mode.state_vars.empty()) fail(mp + ".states", "mode needs at least one state");
    mode.box = parse_box(expect(jm, "box", mp + ".box"), mp + ".box", mode.state_vars.size());

    if (jm.contains("theta")) {
      const auto& jt = jm.at("theta");
      for (const auto& s : jt.at("vars")) mode.theta_vars.push_back(model.vars->require(s.get<std::string>()));
      mode.theta_box = parse_box(expect(jt, "box", mp + ".theta.box"), mp + ".theta.box",
                                 mode.theta_vars.size());
      if (jt.contains("dist") && jt.at("dist").get<std::string>() != "uniform") {
        fail(mp + ".theta.dist", "only 'uniform' distributions are supported");
      }
      std::vector<std::pair<double, double>> ivals;
      for (const Interval& iv : mode.theta_box) ivals.emplace_back(iv.lo, iv.hi);
      mode.theta_dist = UniformBoxDistribution(mode.theta_vars, ivals);
    }

    std::vector<int> dyn_vars = mode.state_vars;
    dyn_vars.insert(dyn_vars.end(), mode.theta_vars.begin(), mode.theta_vars.end());

    mode.dynamics = parse_polys(expect(jm, "dynamics", mp), model.vars, mp + ".dynamics");
    if (mode.dynamics.size() != mode.state_vars.size()) {
      fail(mp + ".dynamics", "expected " + std::to_string(mode.state_vars.size()) +
                                 " entries, got " + std::to_string(mode.dynamics.size()));
    }
    for (size_t i = 0; i < mode.dynamics.size(); ++i) {
      check_vars_in(mode.dynamics[i], dyn_vars, model.vars,
                    mp + ".dynamics[" + std::to_string(i) + "]");
    }

    if (jm.contains("domain_ineqs")) {
      mode.domain_extra.ineqs = parse_polys(jm.at("domain_ineqs"), model.vars, mp + ".domain_ineqs");
      for (const auto& p : mode.domain_extra.ineqs) {
        check_vars_in(p, mode.state_vars, model.vars, mp + ".domain_ineqs");
      }
    }
    if (jm.contains("target_ineqs")) {
      mode.target.ineqs = parse_polys(jm.at("target_ineqs"), model.vars, mp + ".target_ineqs");
      for (const auto& p : mode.target.ineqs) {
        check_vars_in(p, mode.state_vars, model.vars, mp + ".target_ineqs");
      }
      mode.has_target = !mode.target.ineqs.empty();
    }
    model.modes.push_back(std::move(mode));
  }

  if (j.contains("edges")) {
    const auto& jedges = j.at("edges");
    if (!jedges.is_array()) fail("$.edges", "expected an array");
    for (size_t ei = 0; ei < jedges.size(); ++ei) {
      const std::string ep = "$.edges[" + std::to_string(ei) + "]";
      const auto& je = jedges.at(ei);
      Edge edge;
      edge.from = expect(je, "from", ep).get<int>();
      edge.to = expect(je, "to", ep).get<int>();
      if (model.mode_index(edge.from) < 0) fail(ep + ".from", "no such mode id");
      if (model.mode_index(edge.to) < 0) fail(ep + ".to", "no such mode id");
      const Mode& src = model.mode_by_id(edge.from);
      const Mode& dst = model.mode_by_id(edge.to);

      std::vector<int> guard_vars = src.state_vars;
      guard_vars.insert(guard_vars.end(), src.theta_vars.begin(), src.theta_vars.end());
      if (je.contains("guard_ineqs")) {
        edge.guard.ineqs = parse_polys(je.at("guard_ineqs"), model.vars, ep + ".guard_ineqs");
      }
      if (je.contains("guard_eqs")) {
        edge.guard.eqs = parse_polys(je.at("guard_eqs"), model.vars, ep + ".guard_eqs");
      }
      if (edge.guard.empty()) fail(ep, "guard must have at least one inequality or equality");
      for (const auto& p : edge.guard.ineqs) check_vars_in(p, guard_vars, model.vars, ep + ".guard_ineqs");
      for (const auto& p : edge.guard.eqs) check_vars_in(p, guard_vars, model.vars, ep + ".guard_eqs");

      edge.reset = parse_polys(expect(je, "reset", ep), model.vars, ep + ".reset");
      if (edge.reset.size() != dst.state_vars.size()) {
        fail(ep + ".reset", "edge " + std::to_string(edge.from) + "->" + std::to_string(edge.to) +
                                ": reset has " + std::to_string(edge.reset.size()) +
                                " components but destination mode has " +
                                std::to_string(dst.state_vars.size()) + " states");
      }
      // Resets depend on the source continuous state only, never on theta.
      for (const auto& p : edge.reset) check_vars_in(p, src.state_vars, model.vars, ep + ".reset");
      model.edges.push_back(std::move(edge));
    }
  }
  return model;
}

HybridModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model_json(ss.str());
}

std::string serialize_model(const HybridModel& model) {
  ordered_json j;
  j["name"] = model.name;
  if (!model.description.empty()) j["description"] = model.description;
  j["horizon"] = model.horizon;
  j["modes"] = ordered_json::array();
  for (const Mode& m : model.modes) {
    ordered_json jm;
    jm["id"] = m.id;
    ordered_json states = ordered_json::array();
    for (int v : m.state_vars) states.push_back(model.vars->name(v));
    jm["states"] = states;
    ordered_json box = ordered_json::array();
    for (const Interval& iv : m.box) box.push_back({iv.lo, iv.hi});
    jm["box"] = box;
    ordered_json dyn = ordered_json::array();
    for (const Polynomial& p : m.dynamics) dyn.push_back(to_string(p));
    jm["dynamics"] = dyn;
    if (!m.theta_vars.empty()) {
      ordered_json jt;
      ordered_json tv = ordered_json::array();
      for (int v : m.theta_vars) tv.push_back(model.vars->name(v));
      jt["vars"] = tv;
      ordered_json tb = ordered_json::array();
      for (const Interval& iv : m.theta_box) tb.push_back({iv.lo, iv.hi});
      jt["box"] = tb;
      jt["dist"] = "uniform";
      jm["theta"] = jt;
    }
    if (!m.domain_extra.ineqs.empty()) {
      ordered_json d = ordered_json::array();
      for (const Polynomial& p : m.domain_extra.ineqs) d.push_back(to_string(p));
      jm["domain_ineqs"] = d;
    }
    if (m.has_target) {
      ordered_json t = ordered_json::array();
      for (const Polynomial& p : m.target.ineqs) t.push_back(to_string(p));
      jm["target_ineqs"] = t;
    }
    j["modes"].push_back(jm);
  }
  if (!model.edges.empty()) {
    j["edges"] = ordered_json::array();
    for (const Edge& e : model.edges) {
      ordered_json je;
      je["from"] = e.from;
      je["to"] = e.to;
      if (!e.guard.ineqs.empty()) {
        ordered_json g = ordered_json::array();
        for (const Polynomial& p : e.guard.ineqs) g.push_back(to_string(p));
        je["guard_ineqs"] = g;
      }
      if (!e.guard.eqs.empty()) {
        ordered_json g = ordered_json::array();
        for (const Polynomial& p : e.guard.eqs) g.push_back(to_string(p));
        je["guard_eqs"] = g;
      }
      ordered_json r = ordered_json::array();
      for (const Polynomial& p : e.reset) r.push_back(to_string(p));
      je["reset"] = r;
      j["edges"].push_back(je);
    }
  }
  return j.dump(2) + "\n";
}

namespace {
// Physical -> normalized substitution for every variable of one mode.
std::vector<AffineVarMap> mode_subst_maps(const ScalingMap::ModeScaling& ms) {
  std::vector<AffineVarMap> maps = ms.state_maps;
  maps.insert(maps.end(), ms.theta_maps.begin(), ms.theta_maps.end());
  return maps;
}
}  // namespace

std::pair<HybridModel, ScalingMap> normalize(const HybridModel& model) {
  HybridModel out = model;
  ScalingMap scaling;
  scaling.horizon = model.horizon;

  for (Mode& mode : out.modes) {
    ScalingMap::ModeScaling ms;
    ms.mode_id = mode.id;
    for (size_t i = 0; i < mode.state_vars.size(); ++i) {
      const Interval& iv = mode.box[i];
      double c = (iv.hi - iv.lo) / 2.0;
      double m = (iv.hi + iv.lo) / 2.0;
      if (c <= 0.0) throw ModelError("normalize: degenerate box for variable " +
                                     model.vars->name(mode.state_vars[i]));
      ms.state_maps.push_back(AffineVarMap{mode.state_vars[i], c, m});
    }
    for (size_t i = 0; i < mode.theta_vars.size(); ++i) {
      const Interval& iv = mode.theta_box[i];
      double c = (iv.hi - iv.lo) / 2.0;
      double m = (iv.hi + iv.lo) / 2.0;
      if (c <= 0.0) throw ModelError("normalize: degenerate theta box");
      ms.theta_maps.push_back(AffineVarMap{mode.theta_vars[i], c, m});
    }
    const std::vector<AffineVarMap> subst = mode_subst_maps(ms);

    // dxhat/dthat = (T / c_i) * f_i(c*xhat + m, ctheta*thetahat + mtheta)
    for (size_t i = 0; i < mode.dynamics.size(); ++i) {
      mode.dynamics[i] =
          affine_rescale(mode.dynamics[i], subst) * (model.horizon / ms.state_maps[i].scale);
    }
    for (Polynomial& p : mode.domain_extra.ineqs) p = affine_rescale(p, subst);
    for (Polynomial& p : mode.target.ineqs) p = affine_rescale(p, subst);
    for (Interval& iv : mode.box) iv = Interval{-1.0, 1.0};
    std::vector<std::pair<double, double>> unit(mode.theta_vars.size(), {-1.0, 1.0});
    for (Interval& iv : mode.theta_box) iv = Interval{-1.0, 1.0};
    if (!mode.theta_vars.empty()) mode.theta_dist = UniformBoxDistribution(mode.theta_vars, unit);
    scaling.modes.push_back(std::move(ms));
  }

  for (Edge& edge : out.edges) {
    const auto& src = scaling.for_mode(edge.from);
    const auto& dst = scaling.for_mode(edge.to);
    const std::vector<AffineVarMap> src_subst = mode_subst_maps(src);
    for (Polynomial& p : edge.guard.ineqs) p = affine_rescale(p, src_subst);
    for (Polynomial& p : edge.guard.eqs) p = affine_rescale(p, src_subst);
    // xhat_dst = (R(c_src xhat + m_src) - m_dst) / c_dst
    for (size_t k = 0; k < edge.reset.size(); ++k) {
      Polynomial img = affine_rescale(edge.reset[k], src_subst);
      img.add_term(Monomial(), -dst.state_maps[k].offset);
      edge.reset[k] = img * (1.0 / dst.state_maps[k].scale);
    }
  }
  out.horizon = 1.0;
  return {std::move(out), std::move(scaling)};
}

HybridModel denormalize(const HybridModel& normalized, const ScalingMap& map) {
  HybridModel out = normalized;
  out.horizon = map.horizon;
  for (Mode& mode : out.modes) {
    const auto& ms = map.for_mode(mode.id);
    std::vector<AffineVarMap> inv = invert_maps(ms.state_maps);
    std::vector<AffineVarMap> inv_theta = invert_maps(ms.theta_maps);
    std::vector<AffineVarMap> subst = inv;
    subst.insert(subst.end(), inv_theta.begin(), inv_theta.end());

    for (size_t i = 0; i < mode.dynamics.size(); ++i) {
      mode.dynamics[i] =
          affine_rescale(mode.dynamics[i], subst) * (ms.state_maps[i].scale / map.horizon);
    }
    for (Polynomial& p : mode.domain_extra.ineqs) p = affine_rescale(p, subst);
    for (Polynomial& p : mode.target.ineqs) p = affine_rescale(p, subst);
    for (size_t i = 0; i < mode.box.size(); ++i) {
      const AffineVarMap& m = ms.state_maps[i];
      mode.box[i] = Interval{m.offset - m.scale, m.offset + m.scale};
    }
    std::vector<std::pair<double, double>> ivals;
    for (size_t i = 0; i < mode.theta_box.size(); ++i) {
      const AffineVarMap& m = ms.theta_maps[i];
      mode.theta_box[i] = Interval{m.offset - m.scale, m.offset + m.scale};
      ivals.emplace_back(mode.theta_box[i].lo, mode.theta_box[i].hi);
    }
    if (!mode.theta_vars.empty()) mode.theta_dist = UniformBoxDistribution(mode.theta_vars, ivals);
  }
  for (Edge& edge : out.edges) {
    const auto& src = map.for_mode(edge.from);
    const auto& dst = map.for_mode(edge.to);
    std::vector<AffineVarMap> inv = invert_maps(src.state_maps);
    std::vector<AffineVarMap> inv_theta = invert_maps(src.theta_maps);
    inv.insert(inv.end(), inv_theta.begin(), inv_theta.end());
    for (Polynomial& p : edge.guard.ineqs) p = affine_rescale(p, inv);
    for (Polynomial& p : edge.guard.eqs) p = affine_rescale(p, inv);
    for (size_t k = 0; k < edge.reset.size(); ++k) {
      Polynomial img = affine_rescale(edge.reset[k], inv) * dst.state_maps[k].scale;
      img.add_term(Monomial(), dst.state_maps[k].offset);
      edge.reset[k] = img;
    }
  }
  return out;
}

namespace {

struct SamplePoint {
  std::vector<double> full;  // indexed by VarSpace
};

double u01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

bool satisfies(const SemialgebraicSet& set, std::span<const double> point, double ineq_tol,
               double eq_tol) {
  for (const Polynomial& p : set.ineqs) {
    if (eval(p, point) < -ineq_tol) return false;
  }
  for (const Polynomial& p : set.eqs) {
    if (std::abs(eval(p, point)) > eq_tol) return false;
  }
  return true;
}

// Tries to move `point` onto {g = 0} by bisecting one coordinate.
bool project_to_zero(const Polynomial& g, std::vector<double>& point, int var, double lo,
                     double hi) {
  const int kScan = 64;
  double prev_x = lo;
  point[var] = lo;
  double prev_v = eval(g, point);
  for (int i = 1; i <= kScan; ++i) {
    double x = lo + (hi - lo) * i / kScan;
    point[var] = x;
    double v = eval(g, point);
    if (prev_v == 0.0) return true;
    if ((prev_v < 0) != (v < 0)) {
      double a = prev_x, b = x, fa = prev_v;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a + b);
        point[var] = mid;
        double fm = eval(g, point);
        if (fm == 0.0) break;
        if ((fa < 0) != (fm < 0)) {
          b = mid;
        } else {
          a = mid;
          fa = fm;
        }
      }
      return true;
    }
    prev_x = x;
    prev_v = v;
  }
  return false;
}

// Draws a point on the guard surface of `edge` within the source mode's
// box x theta box.  Returns false if no on-guard point was found.
bool sample_on_guard(const Mode& src, const Edge& edge, std::mt19937_64& rng,
                     std::vector<double>& point) {
  for (size_t i = 0; i < src.state_vars.size(); ++i) {
    point[src.state_vars[i]] = src.box[i].lo + (src.box[i].hi - src.box[i].lo) * u01(rng);
  }
  for (size_t i = 0; i < src.theta_vars.size(); ++i) {
    point[src.theta_vars[i]] =
        src.theta_box[i].lo + (src.theta_box[i].hi - src.theta_box[i].lo) * u01(rng);
  }
  for (const Polynomial& g : edge.guard.eqs) {
    // Pick the state coordinate with the steepest slope at the sample.
    int best_var = -1;
    double best_mag = 0.0;
    for (size_t i = 0; i < src.state_vars.size(); ++i) {
      double d = std::abs(eval(differentiate(g, src.state_vars[i]), point));
      if (d > best_mag) {
        best_mag = d;
        best_var = static_cast<int>(i);
      }
    }
    if (best_var < 0) return false;
    if (!project_to_zero(g, point, src.state_vars[best_var], src.box[best_var].lo,
                         src.box[best_var].hi)) {
      return false;
    }
  }
  return satisfies(edge.guard, point, 1e-9, 1e-7);
}

}  // namespace

AssumptionReport check_assumptions(const HybridModel& model, int samples) {
  if (samples < 1) throw ModelError("check_assumptions: samples must be >= 1");
  AssumptionReport report;
  report.samples = samples;
  std::mt19937_64 rng(0x5eedULL);
  std::vector<double> point(model.vars->size(), 0.0);

  for (const Edge& edge : model.edges) {
    const Mode& src = model.mode_by_id(edge.from);
    for (int s = 0; s < samples; ++s) {
      if (!sample_on_guard(src, edge, rng, point)) continue;

      // Assumption: guards of one mode are mutually exclusive.
      for (const Edge& other : model.edges) {
        if (&other == &edge || other.from != edge.from) continue;
        if (satisfies(other.guard, point, 1e-9, 1e-7)) ++report.guard_overlap_violations;
      }
      // Assumption: guards and the terminal set are mutually exclusive.
      if (src.has_target && satisfies(src.target, point, 1e-9, 1e-7)) {
        ++report.guard_target_overlap;
      }
      // Guards are expected on the domain boundary; interior guard points are
      // reported as a warning, not a violation.
      double dist = 1e100;
      for (size_t i = 0; i < src.state_vars.size(); ++i) {
        double c = (src.box[i].hi - src.box[i].lo) / 2.0;
        double m = (src.box[i].hi + src.box[i].lo) / 2.0;
        double xhat = (point[src.state_vars[i]] - m) / c;
        dist = std::min(dist, 1.0 - std::abs(xhat));
      }
      if (dist > 1e-6) ++report.guard_interior_points;
    }
  }
  if (report.guard_interior_points > 0) {
    report.notes.push_back(
        "guard samples were found off the domain-box boundary; consider re-partitioning modes "
        "so that guards lie on the boundary");
  }
  return report;
}

}  // namespace ubrs
