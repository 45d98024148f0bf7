#pragma once

#include <map>
#include <string>
#include <vector>

#include "ubrs/model.hpp"
#include "ubrs/poly.hpp"
#include "ubrs/sdp.hpp"

namespace ubrs {

/// A polynomial with unknown coefficients: one scalar slot per monomial of
/// monomial_basis(vars, degree).  The scalar q of the dual programs is a
/// degree-0 instance.
struct DecisionPolynomial {
  int id = 0;
  std::string name;
  std::vector<int> vars;
  int degree = 0;
  int first_slot = 0;
  std::vector<Monomial> basis;

  int slot_count() const { return static_cast<int>(basis.size()); }
};

/// Linear form c0 + sum_s coeff_s * u_s over the compiler's scalar slots.
struct LinearForm {
  double constant = 0.0;
  std::map<int, double> slots;

  bool is_constant() const { return slots.empty(); }
  LinearForm& add(double c) {
    constant += c;
    return *this;
  }
  LinearForm& add_slot(int slot, double c);
  LinearForm& axpy(double a, const LinearForm& other);
};

/// Polynomial whose coefficients are affine in decision slots: the left-hand
/// sides of the dual constraints.  Supports the ring/calculus operations the
/// relaxation builders need; all of them preserve affinity in the slots.
class AffinePolyExpr {
 public:
  AffinePolyExpr() = default;
  explicit AffinePolyExpr(VarSpacePtr vars) : vars_(std::move(vars)) {}

  static AffinePolyExpr from_poly(const Polynomial& p);
  static AffinePolyExpr from_decision(const DecisionPolynomial& dp, const VarSpacePtr& vars);

  const VarSpacePtr& varspace() const { return vars_; }
  const std::map<Monomial, LinearForm, GradedLexLess>& terms() const { return terms_; }
  int degree() const;

  AffinePolyExpr& add_term(const Monomial& m, const LinearForm& lf);

  AffinePolyExpr operator+(const AffinePolyExpr& other) const;
  AffinePolyExpr operator-(const AffinePolyExpr& other) const;
  AffinePolyExpr operator-() const;
  AffinePolyExpr scaled(double s) const;
  /// Multiplication by a numeric polynomial (keeps slot-affinity).
  AffinePolyExpr times(const Polynomial& p) const;
  AffinePolyExpr differentiated(int var) const;
  /// Simultaneous substitution of variables by numeric polynomials.
  AffinePolyExpr composed(const std::map<int, Polynomial>& subst) const;
  /// Closed-form integration of theta variables against a uniform box law.
  AffinePolyExpr theta_averaged(const UniformBoxDistribution& dist) const;
  /// Numeric evaluation given values for every slot.
  double evaluate(std::span<const double> point, std::span<const double> slot_values) const;
  /// Instantiates the expression once slot values are known.
  Polynomial to_polynomial(std::span<const double> slot_values) const;

 private:
  VarSpacePtr vars_;
  std::map<Monomial, LinearForm, GradedLexLess> terms_;
};

/// d v/dt + <grad_x v, f> for an expression-valued v.
AffinePolyExpr lie_derivative(const AffinePolyExpr& v, std::span<const int> state_vars,
                              std::span<const Polynomial> f, int time_var);

/// Variables plus defining inequalities/equalities of one quadratic-module
/// constraint set, already including any box inequalities.
struct SetDescription {
  std::vector<int> vars;
  std::vector<Polynomial> ineqs;
  std::vector<Polynomial> eqs;
  /// Sampling box for the set's variables (normalized coordinates).
  std::vector<Interval> box;
};

/// One Gram (psd) block of the assembled problem: the multiplier s_k whose
/// weighted square z' G z * h_k enters a quadratic-module identity.  The
/// basis vector z is the tensor Chebyshev basis of the set's box (graded-lex
/// ordered); a raw monomial basis conditions the Schur complement like
/// (1+sqrt(2))^(2d) and stalls the solver from degree 8 up.
struct GramBlockInfo {
  int constraint = 0;   // owning SosConstraintBlock
  int multiplier = 0;   // 0 = s_0, then one per inequality
  Polynomial weight;    // h_k (constant one for s_0)
  std::vector<Polynomial> basis;
  int size() const { return static_cast<int>(basis.size()); }
};

/// Products of per-variable Chebyshev polynomials T_k mapped onto the box,
/// one per exponent tuple of monomial_basis(vars, degree), same order.
std::vector<Polynomial> chebyshev_basis(const VarSpacePtr& space, std::span<const int> vars,
                                        int degree, std::span<const Interval> box);

/// expr = s_0 + sum_k h_k s_k + sum_e g_e m_e with SOS s_k and free m_e,
/// enforced through coefficient matching in the monomial basis.
struct SosConstraintBlock {
  std::string label;
  AffinePolyExpr expr;
  SetDescription set;
  int degree = 0;                 // module degree actually used
  std::vector<int> gram_blocks;   // indices into SdpProblem::grams
  std::vector<int> free_mults;    // decision ids of equality multipliers
  int first_row = 0;
  int row_count = 0;
};

/// One coefficient-matching equality: gram terms + slot terms = rhs.
/// Off-diagonal gram coefficients already carry the symmetric factor of two.
struct EqRow {
  std::vector<SdpEntry> gram_terms;       // value = coefficient on X[b](r,c)
  std::vector<std::pair<int, double>> slot_terms;
  double rhs = 0.0;
  int constraint = 0;
  Monomial monomial;
};

/// Assembled SOS program: minimize a linear functional of the slots subject
/// to the coefficient-matching rows with psd Gram blocks.
struct SdpProblem {
  VarSpacePtr vars;
  std::vector<DecisionPolynomial> decisions;
  int slot_count = 0;
  std::vector<GramBlockInfo> grams;
  std::vector<SosConstraintBlock> constraints;
  std::vector<EqRow> rows;
  std::vector<std::pair<int, double>> objective;  // minimized
  double objective_constant = 0.0;

  const DecisionPolynomial& decision(int id) const { return decisions.at(id); }
  /// Deterministic textual rendering used by byte-level identity tests.
  std::string debug_serialize() const;
};

/// Incremental builder for the dual SOS programs.
class SosProgram {
 public:
  explicit SosProgram(VarSpacePtr vars) : vars_(std::move(vars)) {}

  /// Fresh decision polynomial with C(n+degree, degree) coefficient slots.
  int declare(const std::string& name, std::vector<int> vars, int degree);
  const DecisionPolynomial& decision(int id) const { return decisions_.at(id); }
  AffinePolyExpr expr(int decision_id) const;

  /// Emits Gram blocks and coefficient-matching rows for
  /// "expr is in the d-degree quadratic module of set".  If the expression
  /// degree exceeds d the module degree is raised to the even ceiling of the
  /// expression degree (multipliers must be able to reach every monomial).
  int require_in_quadratic_module(const AffinePolyExpr& expr, const SetDescription& set, int d,
                                  const std::string& label);

  /// Adds the bare equality slot = value.  Used to pin gauge directions such
  /// as the constant shift (v, q) -> (v + c, q - c) that leaves every dual
  /// constraint unchanged.
  void pin_slot(int slot, double value = 0.0);

  void set_objective_min(std::vector<std::pair<int, double>> terms, double constant = 0.0);

  SdpProblem assemble() const;

 private:
  VarSpacePtr vars_;
  std::vector<DecisionPolynomial> decisions_;
  int next_slot_ = 0;
  std::vector<GramBlockInfo> grams_;
  std::vector<SosConstraintBlock> constraints_;
  std::vector<EqRow> rows_;
  std::vector<std::pair<int, double>> objective_;
  double objective_constant_ = 0.0;
};

/// Numeric polynomial for a decision from solved slot values.
Polynomial reconstruct(const SdpProblem& problem, int decision_id,
                       std::span<const double> slot_values);

/// Residual diagnostics of the quadratic-module identity at sampled points of
/// the constraint set (the certificate identity the acceptance suite checks).
struct CertificateIdentityStats {
  double max_identity_residual = 0.0;  // |expr - s0 - sum h_k s_k - sum g_e m_e| scaled
  double min_gram_eigenvalue_margin = 0.0;  // min over blocks of lambda_min + 1e-7*(1+trace)
  double min_pointwise_value = 0.0;    // min of expr/(1+|expr|) over in-set samples
};

CertificateIdentityStats check_certificate_identity(const SdpProblem& problem,
                                                    const SdpConversion& conv,
                                                    const SdpSolution& sol, int constraint_index,
                                                    int n_points, uint64_t seed);

}  // namespace ubrs
