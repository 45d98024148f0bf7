#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ubrs {

/// Base error type for the library.  Subclasses identify the failing layer so
/// the CLI can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};
class ModelError : public Error {
 public:
  using Error::Error;
};
class CompileError : public Error {
 public:
  using Error::Error;
};
class SolverError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

/// An ordered set of named variables.  Indices are dense from 0 and names are
/// unique.  Immutable after construction; shared by all polynomials of one
/// problem.
class VarSpace {
 public:
  explicit VarSpace(std::vector<std::string> names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  /// Returns -1 when the name is unknown.
  int find(std::string_view name) const;
  int require(std::string_view name) const;

  bool operator==(const VarSpace& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
};

using VarSpacePtr = std::shared_ptr<const VarSpace>;

VarSpacePtr make_varspace(std::vector<std::string> names);

/// A power product x^alpha stored sparsely as sorted (variable, exponent)
/// pairs with strictly positive exponents.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<std::pair<int, int>> exps);

  int degree() const { return degree_; }
  int exponent(int var) const;
  bool is_constant() const { return exps_.empty(); }
  const std::vector<std::pair<int, int>>& exponents() const { return exps_; }

  Monomial times(const Monomial& other) const;
  bool operator==(const Monomial& other) const { return exps_ == other.exps_; }

 private:
  std::vector<std::pair<int, int>> exps_;  // sorted by variable index
  int degree_ = 0;
};

/// Graded lexicographic order: lower total degree first; within a degree the
/// monomial with the larger exponent on the earliest differing variable comes
/// first (so for two variables: 1, x1, x2, x1^2, x1*x2, x2^2).
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

/// Uniform product distribution over a box, one interval per variable.
/// Normalized to total mass one; used both for theta draws in the simulator
/// and for closed-form moment substitution in the relaxation builders.
class UniformBoxDistribution {
 public:
  UniformBoxDistribution() = default;
  UniformBoxDistribution(std::vector<int> vars, std::vector<std::pair<double, double>> intervals);

  const std::vector<int>& vars() const { return vars_; }
  const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }
  bool covers(int var) const;
  /// k-th raw moment of the named variable: (b^{k+1}-a^{k+1})/((k+1)(b-a)).
  double moment(int var, int k) const;

 private:
  std::vector<int> vars_;
  std::vector<std::pair<double, double>> intervals_;
};

/// Sparse multivariate polynomial with double coefficients over a shared
/// VarSpace.  The term map is graded-lex ordered and never stores exact-zero
/// coefficients; the empty map is the zero polynomial.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(VarSpacePtr vars) : vars_(std::move(vars)) {}
  Polynomial(VarSpacePtr vars, std::map<Monomial, double, GradedLexLess> terms);

  static Polynomial constant(VarSpacePtr vars, double value);
  static Polynomial variable(VarSpacePtr vars, int var);

  const VarSpacePtr& varspace() const { return vars_; }
  const std::map<Monomial, double, GradedLexLess>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  double coefficient(const Monomial& m) const;
  /// Variables that actually occur with nonzero exponent.
  std::vector<int> support() const;

  Polynomial& add_term(const Monomial& m, double coeff);

  Polynomial operator-() const;

 private:
  VarSpacePtr vars_;
  std::map<Monomial, double, GradedLexLess> terms_;
};

Polynomial add(const Polynomial& a, const Polynomial& b);
Polynomial sub(const Polynomial& a, const Polynomial& b);
Polynomial mul(const Polynomial& a, const Polynomial& b);
Polynomial scale(const Polynomial& a, double s);
Polynomial pow(const Polynomial& a, int k);

inline Polynomial operator+(const Polynomial& a, const Polynomial& b) { return add(a, b); }
inline Polynomial operator-(const Polynomial& a, const Polynomial& b) { return sub(a, b); }
inline Polynomial operator*(const Polynomial& a, const Polynomial& b) { return mul(a, b); }
inline Polynomial operator*(double s, const Polynomial& a) { return scale(a, s); }
inline Polynomial operator*(const Polynomial& a, double s) { return scale(a, s); }

/// Formal partial derivative with respect to one variable.
Polynomial differentiate(const Polynomial& p, int var);

/// Simultaneous substitution of variables by polynomials; variables absent
/// from the map are substituted by themselves.
Polynomial compose(const Polynomial& p, const std::map<int, Polynomial>& substitution);

/// d v/dt + <grad_x v, f>.  `state_vars` pairs with `f` entry-wise; every
/// other variable (time excluded) is treated as having zero dynamics.
Polynomial lie_derivative(const Polynomial& v, std::span<const int> state_vars,
                          std::span<const Polynomial> f, int time_var);

/// Integrates the distribution's variables out of p in closed form, replacing
/// theta^k by its uniform moment.  Result lives in the remaining variables.
Polynomial integrate_uniform(const Polynomial& p, const UniformBoxDistribution& dist);

/// All monomials in `vars` of total degree <= degree, graded-lex ordered.
std::vector<Monomial> monomial_basis(std::span<const int> vars, int degree);

/// Unnormalized Lebesgue moments of the box, indexed like
/// monomial_basis(vars, degree): moment(x^a) = prod_i (b^{a+1}-a^{a+1})/(a+1).
std::vector<double> lebesgue_moments(std::span<const int> vars,
                                     std::span<const std::pair<double, double>> box, int degree);

struct AffineVarMap {
  int var = 0;
  double scale = 1.0;   // c in x -> c*xhat + m; must be nonzero
  double offset = 0.0;  // m
};

/// Substitutes x -> c*x + m per variable.  Invertible; the inverse map has
/// scale 1/c and offset -m/c.
Polynomial affine_rescale(const Polynomial& p, std::span<const AffineVarMap> maps);

/// Point evaluation with Neumaier-compensated term summation.  The assignment
/// must cover every variable in the support of p.
double eval(const Polynomial& p, const std::map<int, double>& point);
/// Fast path: `point` assigns every variable of the varspace by index.
double eval(const Polynomial& p, std::span<const double> point);

/// Renders terms graded-lex from highest degree down, e.g.
/// "3.5*x1^2*th1 - 0.7*x1 + 1".  `display_prune` drops terms with smaller
/// magnitude from the output only; it never alters the polynomial.
std::string to_string(const Polynomial& p, double display_prune = 0.0);

/// Parses the to_string format; whitespace-insensitive, '^' for powers and
/// '*' as separator, implicit coefficient 1 allowed.
Polynomial parse_polynomial(const std::string& text, const VarSpacePtr& vars);

/// Flattened read-only view of a polynomial for hot evaluation loops
/// (the simulator evaluates dynamics millions of times).
class CompiledPoly {
 public:
  CompiledPoly() = default;
  explicit CompiledPoly(const Polynomial& p);
  double eval(std::span<const double> point) const;

 private:
  struct Term {
    double coeff;
    std::vector<std::pair<int, int>> exps;
  };
  std::vector<Term> terms_;
};

namespace detail {
/// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);
uint64_t splitmix64(uint64_t x);
}  // namespace detail

}  // namespace ubrs
