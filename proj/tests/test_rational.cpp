#include <random>

#include "doctest.h"
#include "ldl/errors.hpp"
#include "ldl/rational.hpp"

using ldl::QComplex;
using ldl::Rational;

TEST_CASE("normalization") {
  CHECK(Rational(6, -4) == Rational(-3, 2));
  CHECK(Rational(0, -7) == Rational(0));
  CHECK(Rational(-3, 2).str() == "-3/2");
  CHECK(Rational(4, 2).str() == "2");
  CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("parse round trip") {
  for (const char* s : {"0", "5", "-7", "3/4", "-11/13"}) {
    CHECK(Rational::parse(s).str() == s);
  }
  CHECK_THROWS_AS(Rational::parse("1/0"), ldl::ValidationError);
  CHECK_THROWS_AS(Rational::parse("x"), ldl::ValidationError);
}

TEST_CASE("field axioms on random samples") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(-50, 50);
  auto r = [&] {
    int den = 0;
    while (den == 0) den = d(rng);
    return Rational(d(rng), den);
  };
  for (int i = 0; i < 500; ++i) {
    const Rational a = r(), b = r(), c = r();
    CHECK(a + b == b + a);
    CHECK((a + b) + c == a + (b + c));
    CHECK(a * (b + c) == a * b + a * c);
    CHECK(a - a == Rational(0));
    if (!b.is_zero()) CHECK((a / b) * b == a);
    CHECK(((a < b) == (a.to_double() < b.to_double())));
  }
}

TEST_CASE("overflow is detected") {
  const Rational big(INT64_MAX / 2 + 1);
  CHECK_THROWS(big * big);
}

TEST_CASE("gaussian rationals") {
  const QComplex i = QComplex::i();
  CHECK(i * i == -QComplex::one());
  const QComplex z{Rational(1, 2), Rational(-3)};
  CHECK(z * z.conj() == QComplex{Rational(37, 4), Rational(0)});
  CHECK(z.str() == "(1/2,-3)");
}
