#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace algsolv;
using testsupport::Gen;

namespace {
Poly E() { return Poly::var(Var::E); }
Poly S() { return Poly::var(Var::S); }
Poly X(int i) { return Poly::var(static_cast<Var>(static_cast<int>(Var::X1) + i - 1)); }
}  // namespace

TEST_CASE("rational literals parse exactly", "[polyring]") {
  CHECK(parse_rational("1.1") == Rational(11, 10));
  CHECK(parse_rational("-0.025") == Rational(-1, 40));
  CHECK(parse_rational("12/10") == Rational(6, 5));
  CHECK(parse_rational("+7") == Rational(7));
  CHECK(to_fraction_string(Rational(3)) == "3/1");
  CHECK_THROWS(parse_rational(""));
  CHECK_THROWS(parse_rational("1/0"));
  CHECK_THROWS(parse_rational("1.2/3"));
  CHECK_THROWS(parse_rational("abc"));
}

TEST_CASE("time derivation on the generators", "[polyring]") {
  DerivationParams p;
  CHECK(derive_time(E(), p) == E() * E());
  CHECK(derive_time(S(), p) == Poly(-5) * S() * E() * E() * E() * E() * E() * E());
  p.nu = Rational(2);
  CHECK(derive_time(S(), p) == Poly(-10) * S() * E() * E() * E() * E() * E() * E());
  CHECK(derive_time(X(1) * X(2), p).is_zero());
}

TEST_CASE("space derivatives match exact finite differences", "[polyring]") {
  Gen g(11);
  for (int k = 0; k < 300; ++k) {
    const Poly p = g.poly(5, 4);
    const Point at = g.point();
    for (int axis = 1; axis <= 3; ++axis)
      CHECK(evaluate(derive_space(p, axis), at) == testsupport::finite_difference_derivative(p, axis, at));
  }
}

TEST_CASE("text serialization round-trips", "[polyring]") {
  Gen g(12);
  for (int k = 0; k < 300; ++k) {
    const Poly p = g.poly(6, 5);
    CHECK(parse_poly(to_string(p)) == p);
  }
  CHECK(to_string(Poly()) == "0");
}

TEST_CASE("degree cap stops runaway products", "[polyring]") {
  const Poly big = Poly::var(Var::X1, 40);
  CHECK_THROWS_AS(big * big, DegreeCapExceeded);
  CHECK_NOTHROW(Poly::mul(big, big, 100));
}

TEST_CASE("substitution and evaluation", "[polyring]") {
  const Poly p = X(1) * X(1) + Poly(3) * X(2);
  const Poly q = substitute(p, Var::X1, X(2) + Poly(1));
  Point at{Rational(0), Rational(0), Rational(5), Rational(2), Rational(0)};
  CHECK(evaluate(q, at) == Rational(9 + 6));
  CHECK(evaluate(p, at) == Rational(25 + 6));
}

TEST_CASE("JetCoeff from polynomials and back", "[polyring][jet]") {
  Gen g(13);
  SJetTable table(DerivationParams{});
  for (int k = 0; k < 200; ++k) {
    const Poly p = g.jet_compatible_poly();
    CHECK(to_poly(JetCoeff::from_poly(p), table) == p);
  }
  CHECK_THROWS_AS(JetCoeff::from_poly(E()), std::invalid_argument);
  CHECK_THROWS_AS(JetCoeff::from_poly(S() * S()), std::invalid_argument);
  CHECK_THROWS_AS(JetCoeff::from_poly(Poly(Rational(1, 2))), std::invalid_argument);
}

TEST_CASE("JetCoeff vanishes iff its polynomial does", "[polyring][jet]") {
  Gen g(14);
  SJetTable table(DerivationParams{});
  for (int k = 0; k < 300; ++k) {
    const JetCoeff a = g.jet(), b = g.jet();
    CHECK((a - b).is_zero() == (to_poly(a, table) == to_poly(b, table)));
  }
}

TEST_CASE("time jets vanish at e = 0", "[polyring][jet]") {
  const Point at{Rational(0), Rational(3), Rational(1), Rational(2), Rational(5)};
  JetEvaluator ev(at, DerivationParams{});
  CHECK(ev.jet_value(0) == Rational(3));
  for (unsigned k = 1; k < 6; ++k) CHECK(ev.jet_value(k) == 0);
}
