#include "ubrs/sos.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ubrs {

LinearForm& LinearForm::add_slot(int slot, double c) {
  if (c == 0.0) return *this;
  auto [it, inserted] = slots.emplace(slot, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) slots.erase(it);
  }
  return *this;
}

LinearForm& LinearForm::axpy(double a, const LinearForm& other) {
  constant += a * other.constant;
  for (const auto& [s, c] : other.slots) add_slot(s, a * c);
  return *this;
}

AffinePolyExpr AffinePolyExpr::from_poly(const Polynomial& p) {
  AffinePolyExpr e(p.varspace());
  for (const auto& [m, c] : p.terms()) {
    LinearForm lf;
    lf.constant = c;
    e.terms_.emplace(m, lf);
  }
  return e;
}

AffinePolyExpr AffinePolyExpr::from_decision(const DecisionPolynomial& dp,
                                             const VarSpacePtr& vars) {
  AffinePolyExpr e(vars);
  for (int i = 0; i < dp.slot_count(); ++i) {
    LinearForm lf;
    lf.add_slot(dp.first_slot + i, 1.0);
    e.terms_.emplace(dp.basis[i], lf);
  }
  return e;
}

int AffinePolyExpr::degree() const {
  int d = 0;
  for (const auto& [m, lf] : terms_) d = std::max(d, m.degree());
  return d;
}

AffinePolyExpr& AffinePolyExpr::add_term(const Monomial& m, const LinearForm& lf) {
  auto [it, inserted] = terms_.emplace(m, lf);
  if (!inserted) {
    it->second.constant += lf.constant;
    for (const auto& [s, c] : lf.slots) it->second.add_slot(s, c);
  }
  return *this;
}

AffinePolyExpr AffinePolyExpr::operator+(const AffinePolyExpr& other) const {
  AffinePolyExpr out = *this;
  if (!out.vars_) out.vars_ = other.vars_;
  for (const auto& [m, lf] : other.terms_) out.add_term(m, lf);
  return out;
}

AffinePolyExpr AffinePolyExpr::operator-(const AffinePolyExpr& other) const {
  return *this + other.scaled(-1.0);
}

AffinePolyExpr AffinePolyExpr::operator-() const { return scaled(-1.0); }

AffinePolyExpr AffinePolyExpr::scaled(double s) const {
  AffinePolyExpr out(vars_);
  if (s == 0.0) return out;
  for (const auto& [m, lf] : terms_) {
    LinearForm scaled_lf;
    scaled_lf.axpy(s, lf);
    out.terms_.emplace(m, std::move(scaled_lf));
  }
  return out;
}

AffinePolyExpr AffinePolyExpr::times(const Polynomial& p) const {
  AffinePolyExpr out(vars_);
  for (const auto& [mp, cp] : p.terms()) {
    for (const auto& [m, lf] : terms_) {
      LinearForm scaled_lf;
      scaled_lf.axpy(cp, lf);
      out.add_term(m.times(mp), scaled_lf);
    }
  }
  return out;
}

AffinePolyExpr AffinePolyExpr::differentiated(int var) const {
  AffinePolyExpr out(vars_);
  for (const auto& [m, lf] : terms_) {
    int e = m.exponent(var);
    if (e == 0) continue;
    std::vector<std::pair<int, int>> exps = m.exponents();
    for (auto& [v, ev] : exps) {
      if (v == var) --ev;
    }
    LinearForm scaled_lf;
    scaled_lf.axpy(static_cast<double>(e), lf);
    out.add_term(Monomial(std::move(exps)), scaled_lf);
  }
  return out;
}

AffinePolyExpr AffinePolyExpr::composed(const std::map<int, Polynomial>& subst) const {
  AffinePolyExpr out(vars_);
  std::map<int, std::vector<Polynomial>> powers;
  auto image_pow = [&](int v, int k) -> const Polynomial& {
    auto& vec = powers[v];
    if (vec.empty()) {
      auto it = subst.find(v);
      Polynomial base = it != subst.end() ? it->second : Polynomial::variable(vars_, v);
      vec.push_back(Polynomial::constant(vars_, 1.0));
      vec.push_back(std::move(base));
    }
    while (static_cast<int>(vec.size()) <= k) vec.push_back(mul(vec.back(), vec[1]));
    return vec[k];
  };
  for (const auto& [m, lf] : terms_) {
    Polynomial image = Polynomial::constant(vars_, 1.0);
    for (const auto& [v, e] : m.exponents()) image = mul(image, image_pow(v, e));
    for (const auto& [mi, ci] : image.terms()) {
      LinearForm scaled_lf;
      scaled_lf.axpy(ci, lf);
      out.add_term(mi, scaled_lf);
    }
  }
  return out;
}

AffinePolyExpr AffinePolyExpr::theta_averaged(const UniformBoxDistribution& dist) const {
  AffinePolyExpr out(vars_);
  for (const auto& [m, lf] : terms_) {
    double w = 1.0;
    std::vector<std::pair<int, int>> rest;
    for (const auto& [v, e] : m.exponents()) {
      if (dist.covers(v)) {
        w *= dist.moment(v, e);
      } else {
        rest.emplace_back(v, e);
      }
    }
    LinearForm scaled_lf;
    scaled_lf.axpy(w, lf);
    out.add_term(Monomial(std::move(rest)), scaled_lf);
  }
  return out;
}

double AffinePolyExpr::evaluate(std::span<const double> point,
                                std::span<const double> slot_values) const {
  double sum = 0.0;
  for (const auto& [m, lf] : terms_) {
    double coeff = lf.constant;
    for (const auto& [s, c] : lf.slots) coeff += c * slot_values[s];
    double mv = 1.0;
    for (const auto& [v, e] : m.exponents()) {
      for (int k = 0; k < e; ++k) mv *= point[v];
    }
    sum += coeff * mv;
  }
  return sum;
}

Polynomial AffinePolyExpr::to_polynomial(std::span<const double> slot_values) const {
  Polynomial out(vars_);
  for (const auto& [m, lf] : terms_) {
    double coeff = lf.constant;
    for (const auto& [s, c] : lf.slots) coeff += c * slot_values[s];
    out.add_term(m, coeff);
  }
  return out;
}

AffinePolyExpr lie_derivative(const AffinePolyExpr& v, std::span<const int> state_vars,
                              std::span<const Polynomial> f, int time_var) {
  if (state_vars.size() != f.size()) throw CompileError("lie_derivative: dimension mismatch");
  AffinePolyExpr out = v.differentiated(time_var);
  for (size_t i = 0; i < state_vars.size(); ++i) {
    out = out + v.differentiated(state_vars[i]).times(f[i]);
  }
  return out;
}

std::vector<Polynomial> chebyshev_basis(const VarSpacePtr& space, std::span<const int> vars,
                                        int degree, std::span<const Interval> box) {
  if (vars.size() != box.size()) throw CompileError("chebyshev_basis: box size mismatch");
  // Per-variable Chebyshev ladders T_k(xi(v)) with xi the affine map of the
  // variable's interval onto [-1, 1].
  std::vector<std::vector<Polynomial>> ladder(vars.size());
  for (size_t i = 0; i < vars.size(); ++i) {
    double c = (box[i].hi - box[i].lo) / 2.0;
    double m = (box[i].hi + box[i].lo) / 2.0;
    Polynomial xi = Polynomial::variable(space, vars[i]) * (1.0 / c);
    xi.add_term(Monomial(), -m / c);
    ladder[i].push_back(Polynomial::constant(space, 1.0));
    if (degree >= 1) ladder[i].push_back(xi);
    for (int k = 2; k <= degree; ++k) {
      ladder[i].push_back(2.0 * mul(xi, ladder[i][k - 1]) - ladder[i][k - 2]);
    }
  }
  std::vector<Polynomial> out;
  for (const Monomial& alpha : monomial_basis(vars, degree)) {
    Polynomial z = Polynomial::constant(space, 1.0);
    for (const auto& [v, e] : alpha.exponents()) {
      for (size_t i = 0; i < vars.size(); ++i) {
        if (vars[i] == v) z = mul(z, ladder[i][e]);
      }
    }
    out.push_back(std::move(z));
  }
  return out;
}

int SosProgram::declare(const std::string& name, std::vector<int> vars, int degree) {
  if (degree < 0) throw CompileError("declare: degree must be nonnegative");
  for (const auto& dp : decisions_) {
    if (dp.name == name) throw CompileError("declare: duplicate symbol '" + name + "'");
  }
  DecisionPolynomial dp;
  dp.id = static_cast<int>(decisions_.size());
  dp.name = name;
  dp.vars = std::move(vars);
  dp.degree = degree;
  dp.first_slot = next_slot_;
  dp.basis = monomial_basis(dp.vars, degree);
  next_slot_ += dp.slot_count();
  decisions_.push_back(std::move(dp));
  return decisions_.back().id;
}

AffinePolyExpr SosProgram::expr(int decision_id) const {
  return AffinePolyExpr::from_decision(decisions_.at(decision_id), vars_);
}

namespace {
int even_ceil(int d) { return d % 2 == 0 ? d : d + 1; }
}  // namespace

int SosProgram::require_in_quadratic_module(const AffinePolyExpr& expr, const SetDescription& set,
                                            int d, const std::string& label) {
  const int expr_deg = expr.degree();
  if (set.vars.empty()) {
    if (expr_deg > 0) throw CompileError(label + ": set without variables for nonconstant expr");
  }
  // deg(s_k h_k) <= d for every multiplier; raising d to the even ceiling of
  // the expression degree keeps the identity representable.
  const int dc = std::max(even_ceil(d), even_ceil(expr_deg));
  for (const Polynomial& h : set.ineqs) {
    if (h.degree() > dc) {
      throw CompileError(label + ": inequality degree " + std::to_string(h.degree()) +
                         " exceeds module degree " + std::to_string(dc));
    }
  }
  for (const Polynomial& g : set.eqs) {
    if (g.degree() > dc) {
      throw CompileError(label + ": equality degree exceeds module degree");
    }
  }

  SosConstraintBlock block;
  block.label = label;
  block.expr = expr;
  block.set = set;
  block.degree = dc;
  const int ci = static_cast<int>(constraints_.size());

  // Gram blocks: s_0 then one multiplier per inequality.
  auto push_gram = [&](int mult_index, const Polynomial& weight, int basis_degree) {
    GramBlockInfo g;
    g.constraint = ci;
    g.multiplier = mult_index;
    g.weight = weight;
    g.basis = chebyshev_basis(vars_, set.vars, basis_degree, set.box);
    block.gram_blocks.push_back(static_cast<int>(grams_.size()));
    grams_.push_back(std::move(g));
  };
  push_gram(0, Polynomial::constant(vars_, 1.0), dc / 2);
  for (size_t k = 0; k < set.ineqs.size(); ++k) {
    push_gram(static_cast<int>(k + 1), set.ineqs[k], (dc - set.ineqs[k].degree()) / 2);
  }

  // Guard equalities get free (sign-unconstrained) polynomial multipliers.
  for (size_t e = 0; e < set.eqs.size(); ++e) {
    std::string mult_name =
        "_m" + std::to_string(ci) + "_" + std::to_string(e);
    int id = declare(mult_name, set.vars, dc - set.eqs[e].degree());
    block.free_mults.push_back(id);
  }

  // Coefficient-matching rows over every monomial of degree <= dc.
  // Row semantics: sum(gram terms) + sum(slot terms) = rhs, derived from
  //   expr = sum_k h_k * (z' G_k z) + sum_e g_e * m_e.
  const std::vector<Monomial> row_basis = monomial_basis(set.vars, dc);
  std::map<Monomial, EqRow, GradedLexLess> row_map;
  for (const Monomial& m : row_basis) {
    EqRow r;
    r.constraint = ci;
    r.monomial = m;
    row_map.emplace(m, std::move(r));
  }

  auto row_for = [&](const Monomial& m) -> EqRow& {
    auto it = row_map.find(m);
    if (it == row_map.end()) {
      throw CompileError(label + ": monomial outside row basis (degree bookkeeping bug)");
    }
    return it->second;
  };

  // Gram contributions: monomial coefficients of h_k * z_i * z_j per
  // upper-triangle entry, with the symmetric factor of two folded into
  // off-diagonal coefficients.
  for (int gi : block.gram_blocks) {
    const GramBlockInfo& g = grams_[gi];
    const int n = g.size();
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        Polynomial zz = mul(mul(g.basis[i], g.basis[j]), g.weight);
        double sym = i == j ? 1.0 : 2.0;
        for (const auto& [mono, cz] : zz.terms()) {
          row_for(mono).gram_terms.push_back(SdpEntry{gi, i, j, sym * cz});
        }
      }
    }
  }

  // Free equality multipliers: g_e * m_e.
  for (size_t e = 0; e < set.eqs.size(); ++e) {
    const DecisionPolynomial& mp = decisions_.at(block.free_mults[e]);
    for (int s = 0; s < mp.slot_count(); ++s) {
      for (const auto& [mg, cg] : set.eqs[e].terms()) {
        row_for(mp.basis[s].times(mg)).slot_terms.emplace_back(mp.first_slot + s, cg);
      }
    }
  }

  // Expression: moved to the right-hand side.
  for (const auto& [m, lf] : expr.terms()) {
    EqRow& r = row_for(m);
    r.rhs = lf.constant;
    for (const auto& [s, c] : lf.slots) r.slot_terms.emplace_back(s, -c);
  }

  block.first_row = static_cast<int>(rows_.size());
  for (auto& [m, r] : row_map) {
    // Merge duplicate slot coefficients deterministically.
    std::map<int, double> merged;
    for (const auto& [s, c] : r.slot_terms) merged[s] += c;
    r.slot_terms.assign(merged.begin(), merged.end());
    rows_.push_back(std::move(r));
  }
  block.row_count = static_cast<int>(rows_.size()) - block.first_row;
  constraints_.push_back(std::move(block));
  return ci;
}

void SosProgram::pin_slot(int slot, double value) {
  if (slot < 0 || slot >= next_slot_) throw CompileError("pin_slot: unknown slot");
  EqRow r;
  r.constraint = -1;
  r.rhs = value;
  r.slot_terms.emplace_back(slot, 1.0);
  rows_.push_back(std::move(r));
}

void SosProgram::set_objective_min(std::vector<std::pair<int, double>> terms, double constant) {
  objective_ = std::move(terms);
  objective_constant_ = constant;
}

SdpProblem SosProgram::assemble() const {
  for (const auto& [slot, c] : objective_) {
    if (slot < 0 || slot >= next_slot_) throw CompileError("objective references unknown slot");
  }
  SdpProblem p;
  p.vars = vars_;
  p.decisions = decisions_;
  p.slot_count = next_slot_;
  p.grams = grams_;
  p.constraints = constraints_;
  p.rows = rows_;
  p.objective = objective_;
  p.objective_constant = objective_constant_;
  return p;
}

Polynomial reconstruct(const SdpProblem& problem, int decision_id,
                       std::span<const double> slot_values) {
  const DecisionPolynomial& dp = problem.decision(decision_id);
  if (static_cast<int>(slot_values.size()) < dp.first_slot + dp.slot_count()) {
    throw CompileError("reconstruct: missing slot values");
  }
  Polynomial out(problem.vars);
  for (int i = 0; i < dp.slot_count(); ++i) {
    out.add_term(dp.basis[i], slot_values[dp.first_slot + i]);
  }
  return out;
}

std::string SdpProblem::debug_serialize() const {
  std::ostringstream os;
  os << "slots " << slot_count << "\n";
  for (const auto& dp : decisions) {
    os << "decision " << dp.name << " deg " << dp.degree << " slots " << dp.first_slot << "+"
       << dp.slot_count() << "\n";
  }
  for (size_t g = 0; g < grams.size(); ++g) {
    os << "gram " << g << " c" << grams[g].constraint << " mult " << grams[g].multiplier
       << " size " << grams[g].size() << " weight " << to_string(grams[g].weight) << "\n";
  }
  for (const EqRow& r : rows) {
    os << "row c" << r.constraint << " :";
    for (const auto& e : r.gram_terms) {
      os << " G" << e.block << "(" << e.row << "," << e.col << ")*" << detail::format_double(e.value);
    }
    for (const auto& [s, c] : r.slot_terms) {
      os << " u" << s << "*" << detail::format_double(c);
    }
    os << " = " << detail::format_double(r.rhs) << "\n";
  }
  os << "min";
  for (const auto& [s, c] : objective) os << " " << detail::format_double(c) << "*u" << s;
  os << " + " << detail::format_double(objective_constant) << "\n";
  return os.str();
}

namespace {
double u01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }
}  // namespace

CertificateIdentityStats check_certificate_identity(const SdpProblem& problem,
                                                    const SdpConversion& conv,
                                                    const SdpSolution& sol, int constraint_index,
                                                    int n_points, uint64_t seed) {
  const SosConstraintBlock& block = problem.constraints.at(constraint_index);
  const std::vector<double> slots = conv.slot_values(sol);
  CertificateIdentityStats stats;
  stats.min_gram_eigenvalue_margin = 1e100;
  stats.min_pointwise_value = 1e100;

  // Gram blocks must be (numerically) psd.
  for (int gi : block.gram_blocks) {
    const Eigen::MatrixXd& G = sol.X.at(gi);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    double margin = es.eigenvalues().minCoeff() + 1e-7 * (1.0 + G.trace());
    stats.min_gram_eigenvalue_margin = std::min(stats.min_gram_eigenvalue_margin, margin);
  }

  std::mt19937_64 rng(detail::splitmix64(seed));
  std::vector<double> point(problem.vars->size(), 0.0);
  int produced = 0;
  int attempts = 0;
  const int max_attempts = n_points * 200;
  while (produced < n_points && attempts < max_attempts) {
    ++attempts;
    for (size_t i = 0; i < block.set.vars.size(); ++i) {
      const Interval& iv = block.set.box[i];
      point[block.set.vars[i]] = iv.lo + (iv.hi - iv.lo) * u01(rng);
    }
    bool in_set = true;
    for (const Polynomial& h : block.set.ineqs) {
      if (eval(h, std::span<const double>(point)) < 0) {
        in_set = false;
        break;
      }
    }
    if (!in_set) continue;
    ++produced;

    double expr_val = block.expr.evaluate(point, slots);
    double rhs = 0.0;
    for (int gi : block.gram_blocks) {
      const GramBlockInfo& g = problem.grams[gi];
      Eigen::VectorXd z(g.size());
      for (int i = 0; i < g.size(); ++i) {
        z(i) = eval(g.basis[i], std::span<const double>(point));
      }
      rhs += eval(g.weight, std::span<const double>(point)) * z.dot(sol.X.at(gi) * z);
    }
    for (size_t e = 0; e < block.set.eqs.size(); ++e) {
      Polynomial mult = reconstruct(problem, block.free_mults[e], slots);
      rhs += eval(block.set.eqs[e], std::span<const double>(point)) *
             eval(mult, std::span<const double>(point));
    }
    double denom = 1.0 + std::abs(expr_val);
    stats.max_identity_residual =
        std::max(stats.max_identity_residual, std::abs(expr_val - rhs) / denom);
    stats.min_pointwise_value = std::min(stats.min_pointwise_value, expr_val / denom);
  }
  if (produced < n_points) {
    throw CompileError("check_certificate_identity: could not sample enough in-set points for '" +
                       block.label + "'");
  }
  return stats;
}

}  // namespace ubrs
