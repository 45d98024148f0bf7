#include <cmath>
#include <random>

#include "doctest.h"
#include "ubrs/poly.hpp"

using namespace ubrs;

namespace {
VarSpacePtr space2() { return make_varspace({"x1", "x2"}); }

long binom(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Independent oracle: count exponent tuples by brute-force enumeration.
long count_monomials(int nvars, int degree) {
  if (nvars == 0) return 1;
  long total = 0;
  for (int e = 0; e <= degree; ++e) total += count_monomials(nvars - 1, degree - e);
  return total;
}
}  // namespace

TEST_CASE("monomial basis counts and order") {
  auto vs = space2();
  std::vector<int> vars{0, 1};
  auto basis = monomial_basis(vars, 2);
  REQUIRE(basis.size() == 6);
  // {1, x1, x2, x1^2, x1*x2, x2^2}
  CHECK(basis[0].is_constant());
  CHECK(basis[1].exponent(0) == 1);
  CHECK(basis[2].exponent(1) == 1);
  CHECK(basis[3].exponent(0) == 2);
  CHECK(basis[4].exponent(0) == 1);
  CHECK(basis[4].exponent(1) == 1);
  CHECK(basis[5].exponent(1) == 2);

  CHECK(monomial_basis(std::vector<int>{0}, 0).size() == 1);

  std::vector<int> vars3{0, 1, 2};
  CHECK(monomial_basis(vars3, 4).size() == count_monomials(3, 4));
  CHECK(monomial_basis(vars3, 4).size() == 35);
}

TEST_CASE("monomial basis size matches the binomial formula") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng() % 6);
    int d = static_cast<int>(rng() % 11);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("y" + std::to_string(i));
    std::vector<int> vars(n);
    for (int i = 0; i < n; ++i) vars[i] = i;
    CHECK(static_cast<long>(monomial_basis(vars, d).size()) == binom(n + d, d));
  }
}

TEST_CASE("ring arithmetic") {
  auto vs = space2();
  Polynomial x = Polynomial::variable(vs, 0);
  Polynomial one = Polynomial::constant(vs, 1.0);

  Polynomial prod = (x + one) * (x - one);
  CHECK(prod.coefficient(Monomial({{0, 2}})) == doctest::Approx(1.0));
  CHECK(prod.coefficient(Monomial()) == doctest::Approx(-1.0));
  CHECK(prod.terms().size() == 2);  // x^2 - 1, the cross terms cancel exactly

  Polynomial p = 3.0 * x + one;
  CHECK(to_string(p + Polynomial(vs)) == to_string(p));

  Polynomial y = Polynomial::variable(vs, 1);
  Polynomial sq = pow(x + y, 2);
  CHECK(sq.coefficient(Monomial({{0, 1}, {1, 1}})) == doctest::Approx(2.0));
  CHECK(sq.terms().size() == 3);

  CHECK_THROWS_AS(add(Polynomial::variable(space2(), 0),
                      Polynomial::variable(make_varspace({"a"}), 0)),
                  Error);
}

TEST_CASE("differentiation") {
  auto vs = space2();
  Polynomial x = Polynomial::variable(vs, 0);
  Polynomial y = Polynomial::variable(vs, 1);
  CHECK(to_string(differentiate(pow(x, 3), 0)) == "3*x1^2");
  CHECK(differentiate(pow(y, 2), 0).is_zero());
  // d/dt (t*x^2) with t as x1 and x as x2
  Polynomial p = x * pow(y, 2);
  CHECK(to_string(differentiate(p, 0)) == "x2^2");
}

TEST_CASE("composition") {
  auto vs = make_varspace({"b", "bd"});
  Polynomial bdot = Polynomial::variable(vs, 1);
  // Velocity component of the rimless-wheel reset with alpha = 0.4.
  std::map<int, Polynomial> subst{{1, std::cos(0.8) * bdot}};
  Polynomial r = compose(bdot, subst);
  CHECK(r.coefficient(Monomial({{1, 1}})) == doctest::Approx(0.696707).epsilon(1e-6));

  auto vs2 = space2();
  Polynomial x = Polynomial::variable(vs2, 0);
  Polynomial p = pow(x, 2);
  CHECK(to_string(compose(p, {})) == to_string(p));  // identity substitution

  Polynomial y1 = Polynomial::variable(vs2, 1) + Polynomial::constant(vs2, 1.0);
  Polynomial q = compose(p, {{0, y1}});
  CHECK(q.coefficient(Monomial({{1, 2}})) == doctest::Approx(1.0));
  CHECK(q.coefficient(Monomial({{1, 1}})) == doctest::Approx(2.0));
  CHECK(q.coefficient(Monomial()) == doctest::Approx(1.0));
}

TEST_CASE("compose distributes over products") {
  auto vs = space2();
  std::mt19937_64 rng(21);
  auto rand_poly = [&](int deg) {
    Polynomial p(vs);
    for (const Monomial& m : monomial_basis(std::vector<int>{0, 1}, deg)) {
      p.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
    }
    return p;
  };
  for (int trial = 0; trial < 20; ++trial) {
    Polynomial p = rand_poly(3), q = rand_poly(2);
    std::map<int, Polynomial> subst{{0, rand_poly(2)}, {1, rand_poly(1)}};
    Polynomial lhs = compose(mul(p, q), subst);
    Polynomial rhs = mul(compose(p, subst), compose(q, subst));
    Polynomial diff = sub(lhs, rhs);
    double worst = 0.0;
    for (const auto& [m, c] : diff.terms()) worst = std::max(worst, std::abs(c));
    CHECK(worst <= 1e-12 * 100);  // coefficients are O(10) here
  }
}

TEST_CASE("lie derivative") {
  auto vs = make_varspace({"t", "x", "th"});
  Polynomial t = Polynomial::variable(vs, 0);
  Polynomial x = Polynomial::variable(vs, 1);
  Polynomial th = Polynomial::variable(vs, 2);
  Polynomial f = -0.7 * x + 0.2 * th + Polynomial::constant(vs, -0.1);
  std::vector<int> sv{1};
  std::vector<Polynomial> fs{f};

  Polynomial v = t + pow(x, 2);
  Polynomial lv = lie_derivative(v, sv, fs, 0);
  Polynomial expect = Polynomial::constant(vs, 1.0) + 2.0 * x * f;
  CHECK(sub(lv, expect).is_zero());

  CHECK(lie_derivative(Polynomial::constant(vs, 5.0), sv, fs, 0).is_zero());
  std::vector<Polynomial> ones{Polynomial::constant(vs, 1.0)};
  CHECK(to_string(lie_derivative(x, sv, ones, 0)) == "1");
}

TEST_CASE("lie derivative is linear") {
  auto vs = make_varspace({"t", "x"});
  std::mt19937_64 rng(5);
  std::vector<int> sv{1};
  std::vector<Polynomial> fs{Polynomial::variable(vs, 1) * 0.3 +
                             Polynomial::constant(vs, 0.1)};
  auto rand_poly = [&](int deg) {
    Polynomial p(vs);
    for (const Monomial& m : monomial_basis(std::vector<int>{0, 1}, deg)) {
      p.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
    }
    return p;
  };
  for (int i = 0; i < 10; ++i) {
    Polynomial v1 = rand_poly(4), v2 = rand_poly(4);
    double a = 1.25, b = -0.75;
    Polynomial lhs = lie_derivative(a * v1 + b * v2, sv, fs, 0);
    Polynomial rhs = a * lie_derivative(v1, sv, fs, 0) + b * lie_derivative(v2, sv, fs, 0);
    // Term-wise equality up to one rounding of each coefficient product.
    Polynomial diff = sub(lhs, rhs);
    for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) < 1e-15);
  }
}

TEST_CASE("uniform moments") {
  auto vs = make_varspace({"x", "th"});
  UniformBoxDistribution dist({1}, {{0.2, 1.0}});
  Polynomial th = Polynomial::variable(vs, 1);

  CHECK(eval(integrate_uniform(Polynomial::constant(vs, 1.0), dist), std::map<int, double>{{0, 0.0}}) ==
        doctest::Approx(1.0));
  CHECK(eval(integrate_uniform(th, dist), std::map<int, double>{{0, 0.0}}) == doctest::Approx(0.6));
  // E[th^2] over U([0.2, 1]) = (1 - 0.008) / (3 * 0.8); cross-check against a
  // Simpson-rule quadrature oracle.
  double closed = eval(integrate_uniform(pow(th, 2), dist), std::map<int, double>{{0, 0.0}});
  CHECK(closed == doctest::Approx((1.0 - 0.008) / (3.0 * 0.8)));
  const int n = 2000;
  double h = 0.8 / n, quad = 0.0;
  for (int i = 0; i <= n; ++i) {
    double v = 0.2 + i * h, wgt = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    quad += wgt * v * v;
  }
  quad *= h / 3.0 / 0.8;
  CHECK(closed == doctest::Approx(quad).epsilon(1e-10));
}

TEST_CASE("integrate_uniform is linear and normalizes") {
  auto vs = make_varspace({"x", "th"});
  UniformBoxDistribution dist({1}, {{-0.3, 0.7}});
  std::mt19937_64 rng(11);
  auto rand_poly = [&](int deg) {
    Polynomial p(vs);
    for (const Monomial& m : monomial_basis(std::vector<int>{0, 1}, deg)) {
      p.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
    }
    return p;
  };
  CHECK(eval(integrate_uniform(Polynomial::constant(vs, 1.0), dist), std::map<int, double>{{0, 1.0}}) == 1.0);
  for (int i = 0; i < 10; ++i) {
    Polynomial p = rand_poly(4), q = rand_poly(3);
    Polynomial lhs = integrate_uniform(2.0 * p - 0.5 * q, dist);
    Polynomial rhs = 2.0 * integrate_uniform(p, dist) - 0.5 * integrate_uniform(q, dist);
    Polynomial diff = sub(lhs, rhs);
    for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) < 1e-15);
  }
}

TEST_CASE("lebesgue moments") {
  std::vector<int> v1{0};
  std::vector<std::pair<double, double>> box1{{-1.0, 1.0}};
  auto m = lebesgue_moments(v1, box1, 4);
  REQUIRE(m.size() == 5);
  CHECK(m[0] == doctest::Approx(2.0));   // 1
  CHECK(m[1] == doctest::Approx(0.0));   // x
  CHECK(m[2] == doctest::Approx(2.0 / 3.0));
  CHECK(m[3] == doctest::Approx(0.0));
  CHECK(m[4] == doctest::Approx(0.4));

  std::vector<int> v2{0, 1};
  std::vector<std::pair<double, double>> box2{{-1.0, 1.0}, {-1.0, 1.0}};
  CHECK(lebesgue_moments(v2, box2, 0)[0] == doctest::Approx(4.0));  // box volume
}

TEST_CASE("affine rescale round trip") {
  auto vs = space2();
  Polynomial x = Polynomial::variable(vs, 0);
  // x on [0,2] mapped onto [-1,1]: x = xhat + 1.
  std::vector<AffineVarMap> maps{{0, 1.0, 1.0}};
  Polynomial p = affine_rescale(x, maps);
  CHECK(p.coefficient(Monomial({{0, 1}})) == doctest::Approx(1.0));
  CHECK(p.coefficient(Monomial()) == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Polynomial q(vs);
    for (const Monomial& m : monomial_basis(std::vector<int>{0, 1}, 5)) {
      q.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
    }
    std::vector<AffineVarMap> fw{{0, 0.5, 0.25}, {1, 2.0, -1.0}};
    std::vector<AffineVarMap> bw{{0, 2.0, -0.5}, {1, 0.5, 0.5}};
    Polynomial rt = affine_rescale(affine_rescale(q, fw), bw);
    Polynomial diff = sub(rt, q);
    double worst = 0.0;
    for (const auto& [m, c] : diff.terms()) worst = std::max(worst, std::abs(c));
    CHECK(worst < 1e-12);
  }
  std::vector<AffineVarMap> bad{{0, 0.0, 0.0}};
  CHECK_THROWS_AS(affine_rescale(x, bad), Error);
}

TEST_CASE("evaluation") {
  auto vs = space2();
  Polynomial x = Polynomial::variable(vs, 0);
  Polynomial p = pow(x, 2) - Polynomial::constant(vs, 1.0);
  CHECK(eval(p, std::map<int, double>{{0, 2.0}}) == doctest::Approx(3.0));
  CHECK(eval(Polynomial(vs), std::map<int, double>{{0, 123.0}}) == 0.0);

  auto vs3 = make_varspace({"x", "th"});
  Polynomial q = Polynomial::constant(vs3, 1.0) +
                 2.0 * Polynomial::variable(vs3, 0) * Polynomial::variable(vs3, 1);
  CHECK(eval(q, std::map<int, double>{{0, 0.5}, {1, 1.0}}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(eval(q, std::map<int, double>{{0, 0.5}}), Error);
}

TEST_CASE("string round trip") {
  auto vs = make_varspace({"x1", "th1"});
  Polynomial p = parse_polynomial("3.5*x1^2*th1 - 0.7*x1 + 1", vs);
  CHECK(to_string(p) == "3.5*x1^2*th1 - 0.7*x1 + 1");
  CHECK(eval(p, std::map<int, double>{{0, 1.0}, {1, 1.0}}) == doctest::Approx(3.8));

  // Whitespace-insensitive, implicit coefficients, repeated signs.
  Polynomial q = parse_polynomial("  -x1 + + th1^2", vs);
  CHECK(q.coefficient(Monomial({{0, 1}})) == doctest::Approx(-1.0));
  CHECK(q.coefficient(Monomial({{1, 2}})) == doctest::Approx(1.0));

  CHECK_THROWS_AS(parse_polynomial("2*zz", vs), ParseError);
  CHECK_THROWS_AS(parse_polynomial("", vs), ParseError);
  CHECK_THROWS_AS(parse_polynomial("x1^", vs), ParseError);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    Polynomial r(vs);
    for (const Monomial& m : monomial_basis(std::vector<int>{0, 1}, 6)) {
      if (rng() % 3 == 0) r.add_term(m, ((rng() % 200000) / 1000.0 - 100.0) * 1e-3);
    }
    Polynomial back = parse_polynomial(to_string(r), vs);
    CHECK(sub(back, r).is_zero());
  }
  CHECK(to_string(Polynomial(vs)) == "0");
}

TEST_CASE("compiled polynomial matches eval") {
  auto vs = space2();
  std::mt19937_64 rng(23);
  Polynomial p(vs);
  for (const Monomial& m : monomial_basis(std::vector<int>{0, 1}, 6)) {
    p.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
  }
  CompiledPoly cp(p);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> pt{(rng() % 2000) / 1000.0 - 1.0, (rng() % 2000) / 1000.0 - 1.0};
    CHECK(cp.eval(pt) == doctest::Approx(eval(p, std::span<const double>(pt))).epsilon(1e-12));
  }
}
