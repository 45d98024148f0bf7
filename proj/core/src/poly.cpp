#include "ubrs/poly.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ubrs {

VarSpace::VarSpace(std::vector<std::string> names) : names_(std::move(names)) {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ModelError("variable name must be nonempty");
    for (size_t j = i + 1; j < names_.size(); ++j) {
      if (names_[i] == names_[j]) throw ModelError("duplicate variable name: " + names_[i]);
    }
  }
}

int VarSpace::find(std::string_view name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int VarSpace::require(std::string_view name) const {
  int i = find(name);
  if (i < 0) throw ParseError("unknown variable: " + std::string(name));
  return i;
}

VarSpacePtr make_varspace(std::vector<std::string> names) {
  return std::make_shared<const VarSpace>(std::move(names));
}

Monomial::Monomial(std::vector<std::pair<int, int>> exps) : exps_(std::move(exps)) {
  std::sort(exps_.begin(), exps_.end());
  std::vector<std::pair<int, int>> cleaned;
  cleaned.reserve(exps_.size());
  for (const auto& [v, e] : exps_) {
    if (e < 0) throw Error("negative exponent");
    if (e == 0) continue;
    if (!cleaned.empty() && cleaned.back().first == v) {
      cleaned.back().second += e;
    } else {
      cleaned.emplace_back(v, e);
    }
  }
  exps_ = std::move(cleaned);
  degree_ = 0;
  for (const auto& [v, e] : exps_) degree_ += e;
}

int Monomial::exponent(int var) const {
  for (const auto& [v, e] : exps_) {
    if (v == var) return e;
  }
  return 0;
}

Monomial Monomial::times(const Monomial& other) const {
  std::vector<std::pair<int, int>> merged = exps_;
  merged.insert(merged.end(), other.exps_.begin(), other.exps_.end());
  return Monomial(std::move(merged));
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  // Walk both sparse exponent lists in variable order; the first variable
  // where the exponents differ decides, larger exponent first.
  const auto& ea = a.exponents();
  const auto& eb = b.exponents();
  size_t ia = 0, ib = 0;
  while (ia < ea.size() || ib < eb.size()) {
    int va = ia < ea.size() ? ea[ia].first : INT32_MAX;
    int vb = ib < eb.size() ? eb[ib].first : INT32_MAX;
    if (va < vb) return true;   // a has positive power on an earlier variable
    if (vb < va) return false;
    if (ea[ia].second != eb[ib].second) return ea[ia].second > eb[ib].second;
    ++ia;
    ++ib;
  }
  return false;
}

UniformBoxDistribution::UniformBoxDistribution(std::vector<int> vars,
                                               std::vector<std::pair<double, double>> intervals)
    : vars_(std::move(vars)), intervals_(std::move(intervals)) {
  if (vars_.size() != intervals_.size()) throw ModelError("uniform distribution: size mismatch");
  for (const auto& [a, b] : intervals_) {
    if (!(a < b)) throw ModelError("uniform distribution: requires a < b per interval");
  }
}

bool UniformBoxDistribution::covers(int var) const {
  return std::find(vars_.begin(), vars_.end(), var) != vars_.end();
}

double UniformBoxDistribution::moment(int var, int k) const {
  for (size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i] == var) {
      const auto [a, b] = intervals_[i];
      if (k == 0) return 1.0;
      return (std::pow(b, k + 1) - std::pow(a, k + 1)) / ((k + 1) * (b - a));
    }
  }
  throw Error("moment: variable not covered by distribution");
}

Polynomial::Polynomial(VarSpacePtr vars, std::map<Monomial, double, GradedLexLess> terms)
    : vars_(std::move(vars)), terms_(std::move(terms)) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second == 0.0) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

Polynomial Polynomial::constant(VarSpacePtr vars, double value) {
  Polynomial p(std::move(vars));
  p.add_term(Monomial(), value);
  return p;
}

Polynomial Polynomial::variable(VarSpacePtr vars, int var) {
  if (var < 0 || var >= vars->size()) throw Error("variable index out of range");
  Polynomial p(std::move(vars));
  p.add_term(Monomial({{var, 1}}), 1.0);
  return p;
}

int Polynomial::degree() const {
  if (terms_.empty()) return 0;
  return terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

std::vector<int> Polynomial::support() const {
  std::vector<bool> seen(vars_ ? vars_->size() : 0, false);
  for (const auto& [m, c] : terms_) {
    for (const auto& [v, e] : m.exponents()) seen[v] = true;
  }
  std::vector<int> out;
  for (size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

Polynomial& Polynomial::add_term(const Monomial& m, double coeff) {
  if (coeff == 0.0) return *this;
  auto [it, inserted] = terms_.emplace(m, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
  return *this;
}

Polynomial Polynomial::operator-() const { return scale(*this, -1.0); }

namespace {
void check_same_space(const Polynomial& a, const Polynomial& b) {
  if (!a.varspace() || !b.varspace()) return;  // default-constructed zero is compatible
  if (a.varspace() == b.varspace()) return;
  if (*a.varspace() == *b.varspace()) return;
  throw Error("polynomial operands use different variable spaces");
}

VarSpacePtr pick_space(const Polynomial& a, const Polynomial& b) {
  return a.varspace() ? a.varspace() : b.varspace();
}
}  // namespace

Polynomial add(const Polynomial& a, const Polynomial& b) {
  check_same_space(a, b);
  Polynomial out(pick_space(a, b));
  for (const auto& [m, c] : a.terms()) out.add_term(m, c);
  for (const auto& [m, c] : b.terms()) out.add_term(m, c);
  return out;
}

Polynomial sub(const Polynomial& a, const Polynomial& b) {
  check_same_space(a, b);
  Polynomial out(pick_space(a, b));
  for (const auto& [m, c] : a.terms()) out.add_term(m, c);
  for (const auto& [m, c] : b.terms()) out.add_term(m, -c);
  return out;
}

Polynomial mul(const Polynomial& a, const Polynomial& b) {
  check_same_space(a, b);
  Polynomial out(pick_space(a, b));
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) {
      out.add_term(ma.times(mb), ca * cb);
    }
  }
  return out;
}

Polynomial scale(const Polynomial& a, double s) {
  Polynomial out(a.varspace());
  if (s == 0.0) return out;
  for (const auto& [m, c] : a.terms()) out.add_term(m, c * s);
  return out;
}

Polynomial pow(const Polynomial& a, int k) {
  if (k < 0) throw Error("negative polynomial power");
  Polynomial out = Polynomial::constant(a.varspace(), 1.0);
  for (int i = 0; i < k; ++i) out = mul(out, a);
  return out;
}

Polynomial differentiate(const Polynomial& p, int var) {
  Polynomial out(p.varspace());
  for (const auto& [m, c] : p.terms()) {
    int e = m.exponent(var);
    if (e == 0) continue;
    std::vector<std::pair<int, int>> exps = m.exponents();
    for (auto& [v, ev] : exps) {
      if (v == var) --ev;
    }
    out.add_term(Monomial(std::move(exps)), c * e);
  }
  return out;
}

Polynomial compose(const Polynomial& p, const std::map<int, Polynomial>& substitution) {
  Polynomial out(p.varspace());
  // Cache powers of each image polynomial as needed.
  std::map<int, std::vector<Polynomial>> powers;  // powers[v][k] = image^k
  auto image_pow = [&](int v, int k) -> const Polynomial& {
    auto& vec = powers[v];
    if (vec.empty()) {
      auto it = substitution.find(v);
      Polynomial base =
          it != substitution.end() ? it->second : Polynomial::variable(p.varspace(), v);
      check_same_space(p, base);
      vec.push_back(Polynomial::constant(p.varspace(), 1.0));
      vec.push_back(std::move(base));
    }
    while (static_cast<int>(vec.size()) <= k) vec.push_back(mul(vec.back(), vec[1]));
    return vec[k];
  };
  for (const auto& [m, c] : p.terms()) {
    Polynomial term = Polynomial::constant(p.varspace(), c);
    for (const auto& [v, e] : m.exponents()) term = mul(term, image_pow(v, e));
    out = add(out, term);
  }
  return out;
}

Polynomial lie_derivative(const Polynomial& v, std::span<const int> state_vars,
                          std::span<const Polynomial> f, int time_var) {
  if (state_vars.size() != f.size()) throw Error("lie_derivative: dynamics dimension mismatch");
  Polynomial out = differentiate(v, time_var);
  for (size_t i = 0; i < state_vars.size(); ++i) {
    out = add(out, mul(differentiate(v, state_vars[i]), f[i]));
  }
  return out;
}

Polynomial integrate_uniform(const Polynomial& p, const UniformBoxDistribution& dist) {
  Polynomial out(p.varspace());
  for (const auto& [m, c] : p.terms()) {
    double w = c;
    std::vector<std::pair<int, int>> rest;
    for (const auto& [v, e] : m.exponents()) {
      if (dist.covers(v)) {
        w *= dist.moment(v, e);
      } else {
        rest.emplace_back(v, e);
      }
    }
    out.add_term(Monomial(std::move(rest)), w);
  }
  return out;
}

namespace {
// Exponent tuples of total degree exactly `remaining`, higher exponent on the
// earlier variable first; combined with the by-degree outer loop this yields
// graded-lex order.
void enumerate_exact(std::span<const int> vars, size_t pos, int remaining,
                     std::vector<std::pair<int, int>>& acc, std::vector<Monomial>& out) {
  if (pos == vars.size()) {
    if (remaining == 0) out.emplace_back(acc);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    if (e > 0) acc.emplace_back(vars[pos], e);
    enumerate_exact(vars, pos + 1, remaining - e, acc, out);
    if (e > 0) acc.pop_back();
  }
}
}  // namespace

std::vector<Monomial> monomial_basis(std::span<const int> vars, int degree) {
  if (degree < 0) throw Error("monomial_basis: degree must be nonnegative");
  std::vector<Monomial> out;
  std::vector<std::pair<int, int>> acc;
  for (int d = 0; d <= degree; ++d) enumerate_exact(vars, 0, d, acc, out);
  return out;
}

std::vector<double> lebesgue_moments(std::span<const int> vars,
                                     std::span<const std::pair<double, double>> box, int degree) {
  if (vars.size() != box.size()) throw Error("lebesgue_moments: box size mismatch");
  std::vector<Monomial> basis = monomial_basis(vars, degree);
  std::vector<double> out;
  out.reserve(basis.size());
  for (const Monomial& m : basis) {
    double mom = 1.0;
    for (size_t i = 0; i < vars.size(); ++i) {
      int e = m.exponent(vars[i]);
      const auto [a, b] = box[i];
      mom *= (std::pow(b, e + 1) - std::pow(a, e + 1)) / (e + 1);
    }
    out.push_back(mom);
  }
  return out;
}

Polynomial affine_rescale(const Polynomial& p, std::span<const AffineVarMap> maps) {
  std::map<int, Polynomial> subst;
  for (const AffineVarMap& m : maps) {
    if (m.scale == 0.0) throw Error("affine_rescale: zero scale factor");
    Polynomial img = Polynomial::variable(p.varspace(), m.var) * m.scale;
    img.add_term(Monomial(), m.offset);
    subst.emplace(m.var, std::move(img));
  }
  return compose(p, subst);
}

namespace {
double eval_term(const Monomial& m, std::span<const double> point) {
  double v = 1.0;
  for (const auto& [var, e] : m.exponents()) {
    double x = point[var];
    for (int k = 0; k < e; ++k) v *= x;
  }
  return v;
}
}  // namespace

double eval(const Polynomial& p, std::span<const double> point) {
  if (p.varspace() && static_cast<int>(point.size()) < p.varspace()->size()) {
    throw Error("eval: point does not assign every variable");
  }
  // Neumaier compensated summation keeps grid sweeps reproducible to the ulp.
  double sum = 0.0, comp = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double t = c * eval_term(m, point);
    double s = sum + t;
    if (std::abs(sum) >= std::abs(t)) {
      comp += (sum - s) + t;
    } else {
      comp += (t - s) + sum;
    }
    sum = s;
  }
  return sum + comp;
}

double eval(const Polynomial& p, const std::map<int, double>& point) {
  std::vector<double> full(p.varspace() ? p.varspace()->size() : 0, 0.0);
  std::vector<bool> assigned(full.size(), false);
  for (const auto& [v, x] : point) {
    if (v >= 0 && v < static_cast<int>(full.size())) {
      full[v] = x;
      assigned[v] = true;
    }
  }
  for (int v : p.support()) {
    if (!assigned[v]) throw Error("eval: unassigned variable " + p.varspace()->name(v));
  }
  return eval(p, full);
}

namespace detail {
std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  }
  return std::string(buf, ptr);
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

std::string to_string(const Polynomial& p, double display_prune) {
  const auto& vs = p.varspace();
  std::vector<std::pair<Monomial, double>> terms(p.terms().begin(), p.terms().end());
  std::reverse(terms.begin(), terms.end());  // highest degree first
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms) {
    if (display_prune > 0.0 && std::abs(c) < display_prune) continue;
    double mag = std::abs(c);
    if (first) {
      if (c < 0) out += "-";
      first = false;
    } else {
      out += c < 0 ? " - " : " + ";
    }
    bool wrote_coeff = false;
    if (mag != 1.0 || m.is_constant()) {
      out += detail::format_double(mag);
      wrote_coeff = true;
    }
    for (const auto& [v, e] : m.exponents()) {
      if (wrote_coeff || v != m.exponents().front().first) out += "*";
      out += vs->name(v);
      if (e > 1) {
        out += "^";
        out += std::to_string(e);
      }
    }
  }
  if (first) return "0";
  return out;
}

namespace {
struct Lexer {
  const std::string& s;
  size_t i = 0;
  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eof() {
    skip_ws();
    return i >= s.size();
  }
  char peek() {
    skip_ws();
    return i < s.size() ? s[i] : '\0';
  }
};
}  // namespace

Polynomial parse_polynomial(const std::string& text, const VarSpacePtr& vars) {
  Polynomial out(vars);
  Lexer lx{text};
  if (lx.eof()) throw ParseError("empty polynomial string");
  while (!lx.eof()) {
    double sign = 1.0;
    char c = lx.peek();
    if (c == '+' || c == '-') {
      sign = c == '-' ? -1.0 : 1.0;
      ++lx.i;
      while (true) {
        c = lx.peek();
        if (c == '+') {
          ++lx.i;
        } else if (c == '-') {
          sign = -sign;
          ++lx.i;
        } else {
          break;
        }
      }
    }
    // term := [number] ('*'? factor)*
    double coeff = sign;
    bool saw_anything = false;
    c = lx.peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text.c_str() + lx.i;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) throw ParseError("bad number in polynomial at offset " + std::to_string(lx.i));
      lx.i += static_cast<size_t>(end - begin);
      coeff *= v;
      saw_anything = true;
    }
    std::vector<std::pair<int, int>> exps;
    while (true) {
      c = lx.peek();
      if (c == '*') {
        ++lx.i;
        c = lx.peek();
      }
      if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_')) break;
      size_t start = lx.i;
      while (lx.i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[lx.i])) || text[lx.i] == '_')) {
        ++lx.i;
      }
      std::string name = text.substr(start, lx.i - start);
      int var = vars->find(name);
      if (var < 0) throw ParseError("unknown variable '" + name + "' in polynomial");
      int e = 1;
      if (lx.peek() == '^') {
        ++lx.i;
        lx.skip_ws();
        size_t es = lx.i;
        while (lx.i < text.size() && std::isdigit(static_cast<unsigned char>(text[lx.i]))) ++lx.i;
        if (lx.i == es) throw ParseError("missing exponent after '^'");
        e = std::stoi(text.substr(es, lx.i - es));
      }
      exps.emplace_back(var, e);
      saw_anything = true;
    }
    if (!saw_anything) {
      throw ParseError("malformed polynomial near offset " + std::to_string(lx.i));
    }
    out.add_term(Monomial(std::move(exps)), coeff);
  }
  return out;
}

CompiledPoly::CompiledPoly(const Polynomial& p) {
  terms_.reserve(p.terms().size());
  for (const auto& [m, c] : p.terms()) terms_.push_back(Term{c, m.exponents()});
}

double CompiledPoly::eval(std::span<const double> point) const {
  double sum = 0.0;
  for (const Term& t : terms_) {
    double v = t.coeff;
    for (const auto& [var, e] : t.exps) {
      double x = point[var];
      for (int k = 0; k < e; ++k) v *= x;
    }
    sum += v;
  }
  return sum;
}

}  // namespace ubrs
