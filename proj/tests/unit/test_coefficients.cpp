#include "doctest.h"

#include "lyapexp/coefficients.hpp"

#include <random>

using namespace lyapexp;

namespace {

MomentVector<Rational> mv(std::initializer_list<Rational> m) { return MomentVector<Rational>(std::vector<Rational>(m)); }

Rational random_unit(std::mt19937_64& gen) {
  std::uniform_int_distribution<long> den(2, 1000);
  const long d = den(gen);
  std::uniform_int_distribution<long> num(1, d - 1);
  return Rational(num(gen), d);
}

}  // namespace

TEST_CASE("g table examples") {
  const auto t = g_table(mv({Rational(3, 4), Rational(3, 4)}), 2);
  CHECK(t.g(1, 0) == 3);
  CHECK(t.g(2, 0) == 21);
  CHECK(t.g(1, 1) == 72);
  for (int k = 0; k <= 2; ++k) CHECK(t.g(0, k) == (k == 0 ? 1 : 0));
}

TEST_CASE("degenerate and unstable moments") {
  try {
    g_table(mv({Rational(4, 5), Rational(1)}), 2);
    FAIL("expected DegenerateMoment");
  } catch (const DegenerateMoment& e) {
    CHECK(e.order == 2);
  }
  try {
    g_table(mv({Rational(4, 5), Rational(6, 5)}), 2);
    FAIL("expected UnstableMoment");
  } catch (const UnstableMoment& e) {
    CHECK(e.order == 2);
  }
  CHECK_NOTHROW(g_table(mv({Rational(4, 5), Rational(1)}), 1));
}

TEST_CASE("ell examples") {
  const auto t = ell_coefficients(mv({Rational(3, 4), Rational(3, 4)}), 2);
  CHECK(t.ell(1) == 3);
  CHECK(t.ell(2) == Rational(165, 2));
  CHECK(t.ell(2) == t.g(1, 1) + t.g(2, 0) / 2);
  CHECK(ell_coefficients(mv({Rational(4, 5)}), 1).ell(1) == 4);
  CHECK(ell_coefficients(MomentVector<Rational>(), 0).ell.size() == 1);
}

TEST_CASE("regular part") {
  const auto t = ell_coefficients(mv({Rational(3, 4), Rational(3, 4)}), 2);
  CHECK(regular_part(t, 0.0) == 0.0);
  CHECK(regular_part(t, 0.1) == doctest::Approx(0.021750).epsilon(1e-14));
  const auto empty = ell_coefficients(MomentVector<Rational>(), 0);
  for (double e : {0.0, 0.1, 0.7}) CHECK(regular_part(empty, e) == 0.0);
}

TEST_CASE("closed forms hold exactly for random rational moments") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Rational m1 = random_unit(gen), m2 = random_unit(gen);
    const auto t = ell_coefficients(mv({m1, m2}), 2);
    CHECK(t.ell(1) == ell1_closed_form(m1));
    CHECK(t.ell(2) == ell2_closed_form(m1, m2));
  }
}

TEST_CASE("positivity and order independence") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Rational> m;
    for (int j = 0; j < 5; ++j) m.push_back(random_unit(gen));
    const MomentVector<Rational> moments(m);
    const auto base = g_table(moments, 5);
    auto with_ell = base;
    fill_ell(with_ell);
    for (int s = 0; s <= 5; ++s) {
      for (int l = 1; l + s <= 5; ++l) CHECK(base.g(l, s) > 0);
      if (s >= 1) CHECK(with_ell.ell(s) > 0);
    }
    for (int extra : {1, 2}) {
      const auto wider = g_table(moments, 5, extra);
      for (int s = 0; s <= 5; ++s)
        for (int l = 1; l + s <= 5; ++l) CHECK(wider.g(l, s) == base.g(l, s));
    }
  }
}

TEST_CASE("extended precision path agrees with the exact path") {
  std::mt19937_64 gen(3);
  std::vector<Rational> m;
  std::vector<long double> mf;
  for (int j = 0; j < 4; ++j) {
    m.push_back(random_unit(gen));
    mf.push_back(static_cast<long double>(to_double(m.back())));
  }
  const auto exact = ell_coefficients(MomentVector<Rational>(m), 4);
  const auto approx = ell_coefficients(MomentVector<long double>(mf), 4);
  for (int s = 1; s <= 4; ++s)
    CHECK(to_double(approx.ell(s)) == doctest::Approx(to_double(exact.ell(s))).epsilon(1e-12));
  CHECK(approx.condition >= 1.0);
}

TEST_CASE("coefficients from a law") {
  const auto spec = DistributionSpec::two_point(Rational(1, 2), Rational(2), Rational(1, 5));
  const auto t = coefficients_for(spec, 1, true);
  REQUIRE(t.exact);
  CHECK(t.exact->ell(1) == 4);
  CHECK_THROWS_AS(coefficients_for(spec, 2), DegenerateMoment);

  const auto u = DistributionSpec::uniform_interval(0.1, 0.9);
  CHECK_THROWS_AS(coefficients_for(u, 2, true), InvalidSpec);
  const auto f = coefficients_for(u, 2);
  REQUIRE(f.approx);
  CHECK(f.ell(1) == doctest::Approx(1.0));   // E[Z] = 1/2
  const auto forced = coefficients_for(spec, 1, false, true);
  CHECK(forced.approx);
  CHECK(forced.ell(1) == doctest::Approx(4.0).epsilon(1e-15));
}
