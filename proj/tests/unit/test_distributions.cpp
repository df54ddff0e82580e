#include "doctest.h"

#include "lyapexp/distributions.hpp"
#include "lyapexp/errors.hpp"

#include <cmath>
#include <random>

using namespace lyapexp;

namespace {

DistributionSpec two_point(int lo_n, int lo_d, int hi_n, int hi_d, int p_n, int p_d) {
  return DistributionSpec::two_point(Rational(lo_n, lo_d), Rational(hi_n, hi_d), Rational(p_n, p_d));
}

}  // namespace

TEST_CASE("moment examples") {
  const auto odd = DistributionSpec::finite(
      std::vector<std::pair<Rational, Rational>>{{Rational(3, 2), Rational(1, 4)}, {Rational(1, 2), Rational(3, 4)}});
  const auto m = moment(odd, 1.0);
  REQUIRE(m.exact);
  CHECK(*m.exact == Rational(3, 4));
  CHECK(m.value == 0.75);

  const auto a2 = two_point(1, 2, 2, 1, 1, 5);
  CHECK(moment(a2, 0.0).value == 1.0);
  CHECK(*moment(a2, 2.0).exact == 1);
  CHECK(moment(DistributionSpec::uniform_interval(0.1, 0.9), 0.0).value == 1.0);
}

TEST_CASE("moment equals brute-force weighted sum") {
  const auto spec = DistributionSpec::finite(std::vector<std::pair<double, double>>{{0.3, 0.2}, {1.7, 0.5}, {0.9, 0.3}});
  for (double g : {0.0, 0.5, 1.0, 2.5, 7.0}) {
    const double brute = 0.2 * std::pow(0.3, g) + 0.5 * std::pow(1.7, g) + 0.3 * std::pow(0.9, g);
    CHECK(moment(spec, g).value == doctest::Approx(brute).epsilon(1e-12));
    CHECK(log_moment_power(spec, g) == doctest::Approx(std::log(brute)).epsilon(1e-12));
  }
  const auto u = DistributionSpec::uniform_interval(0.5, 1.5);
  CHECK(moment(u, 2.0).value == doctest::Approx((std::pow(1.5, 3) - std::pow(0.5, 3)) / 3.0));
  const auto lu = DistributionSpec::log_uniform(0.5, 2.0);
  CHECK(moment(lu, 1.0).value == doctest::Approx(1.5 / std::log(4.0)));
}

TEST_CASE("log moment examples") {
  CHECK(log_moment(two_point(1, 2, 2, 1, 1, 2)) == 0.0);
  CHECK(log_moment(two_point(1, 4, 4, 1, 1, 3)) == doctest::Approx(-std::log(4.0) / 3.0).epsilon(1e-14));
  CHECK(log_moment(two_point(1, 4, 4, 1, 1, 3)) < 0.0);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(DistributionSpec::finite(std::vector<std::pair<Rational, Rational>>{{Rational(1, 2), Rational(1)}}),
                  InvalidSpec);
  CHECK_THROWS_AS(DistributionSpec::finite(std::vector<std::pair<Rational, Rational>>{{Rational(1, 2), Rational(1, 2)},
                                                                                      {Rational(2), Rational(1, 3)}}),
                  InvalidSpec);
  CHECK_THROWS_AS(two_point(-1, 2, 2, 1, 1, 2), InvalidSpec);
  CHECK_THROWS_AS(DistributionSpec::uniform_interval(0.0, 1.0), InvalidSpec);
  CHECK_THROWS_AS(DistributionSpec::uniform_interval(0.5, 0.5), InvalidSpec);
}

TEST_CASE("solve_alpha examples") {
  const auto a2 = solve_alpha(two_point(1, 2, 2, 1, 1, 5));
  CHECK(a2.kind == AlphaKind::finite);
  CHECK(a2.alpha == 2.0);
  CHECK(a2.exact_integer);

  const auto half = solve_alpha(two_point(1, 4, 4, 1, 1, 3));
  CHECK(half.alpha == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_FALSE(half.exact_integer);

  CHECK(solve_alpha(DistributionSpec::uniform_interval(0.1, 0.9)).kind == AlphaKind::infinite);
  CHECK(solve_alpha(two_point(1, 2, 2, 1, 1, 2)).kind == AlphaKind::zero_boundary);
}

TEST_CASE("solve_alpha residual and below-root property") {
  const double tol = 1e-12;
  for (const auto& spec : {two_point(1, 3, 3, 1, 1, 4), two_point(1, 5, 7, 2, 1, 6),
                           DistributionSpec::uniform_interval(0.2, 1.4), DistributionSpec::log_uniform(0.3, 1.6)}) {
    const auto a = solve_alpha(spec, tol);
    REQUIRE(a.kind == AlphaKind::finite);
    CHECK(std::abs(moment(spec, a.alpha).value - 1.0) <= tol * 10);
    for (int i = 1; i < 20; ++i) {
      const double g = (a.alpha - 1e-6) * i / 20.0;
      CHECK(moment(spec, g).value < 1.0);
    }
  }
}

TEST_CASE("convexity of the log moment, exactly at integer orders") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> num(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const Rational a(num(gen), num(gen) + 1), b(num(gen) + 3, num(gen)), c(num(gen), 7);
    if (a == b || b == c || a == c) continue;
    const Rational w1(num(gen), 40), w2(num(gen), 40);
    const auto spec =
        DistributionSpec::finite(std::vector<std::pair<Rational, Rational>>{{a, w1}, {b, w2}, {c, 1 - w1 - w2}});
    for (unsigned g1 = 0; g1 <= 4; ++g1) {
      for (unsigned g2 = g1 + 2; g2 <= 8; g2 += 2) {
        const auto mid = *exact_moment(spec, (g1 + g2) / 2);
        CHECK(mid * mid <= *exact_moment(spec, g1) * *exact_moment(spec, g2));
      }
    }
  }
}

TEST_CASE("sampling") {
  const auto spec = two_point(1, 2, 2, 1, 1, 5);
  const auto a = sample(spec, 42, 100000);
  CHECK(a == sample(spec, 42, 100000));
  CHECK(a != sample(spec, 43, 100000));
  std::size_t high = 0;
  for (double v : a) {
    REQUIRE((v == 0.5 || v == 2.0));
    high += v == 2.0;
  }
  const double p = 0.2, n = 100000.0;
  CHECK(std::abs(high / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));

  const auto u = DistributionSpec::uniform_interval(0.1, 0.9);
  for (double v : sample(u, 1, 10000)) {
    REQUIRE(v >= 0.1);
    REQUIRE(v <= 0.9);
  }
}

TEST_CASE("assumption reports") {
  const auto ok = validate_assumptions(two_point(1, 2, 2, 1, 1, 5));
  CHECK(ok.all_pass());
  CHECK(ok.bounded_support);
  CHECK(ok.sup_norm == 2.0);

  const auto sym = validate_assumptions(two_point(1, 2, 2, 1, 1, 2));
  CHECK_FALSE(sym.negative_log_moment);
  CHECK_FALSE(sym.all_pass());

  const auto single = validate_assumptions(DistributionSpec::point_mass(0.5));
  CHECK_FALSE(single.non_deterministic);
  CHECK_FALSE(single.all_pass());
}

TEST_CASE("reciprocal law and E[log(1+Z)]") {
  const auto spec = two_point(1, 4, 4, 1, 2, 3);
  const auto r = spec.reciprocal();
  CHECK(log_moment(r) == doctest::Approx(-log_moment(spec)));
  CHECK(log1p_moment(spec) == doctest::Approx(std::log(1.25) / 3.0 + 2.0 * std::log(5.0) / 3.0));
  CHECK_THROWS_AS(DistributionSpec::uniform_interval(0.1, 0.9).reciprocal(), InvalidSpec);
}
