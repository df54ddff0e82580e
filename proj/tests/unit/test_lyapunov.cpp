#include "doctest.h"

#include "lyapexp/lyapunov.hpp"

#include <cmath>

using namespace lyapexp;

namespace {

const auto kAlpha2 = DistributionSpec::two_point(Rational(1, 2), Rational(2), Rational(1, 5));

ChainConfig config(std::size_t steps, bool check = true) {
  ChainConfig cfg;
  cfg.steps = steps;
  cfg.check_assumptions = check;
  return cfg;
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

double eigen_oracle(double c, double eps) {
  return std::log(((1.0 + c) + std::sqrt((1.0 - c) * (1.0 - c) + 4.0 * eps * eps * c)) / 2.0);
}

}  // namespace

TEST_CASE("point mass oracle") {
  for (double c : {0.3, 0.9, 1.7}) {
    for (double eps : {0.05, 0.4}) {
      CHECK(lyapunov_point_mass(c, eps) == doctest::Approx(eigen_oracle(c, eps)).epsilon(1e-14));
      const auto spec = DistributionSpec::point_mass(c);
      const auto d = lyapunov_direct(spec, eps, config(100000, false));
      CHECK(std::abs(d.value - eigen_oracle(c, eps)) <= std::max(4.0 * d.std_error, 1e-12));
      if (c < 1.0) {
        const auto i = lyapunov_invariant(spec, eps, config(100000, false));
        CHECK(std::abs(i.value - eigen_oracle(c, eps)) <= std::max(4.0 * i.std_error, 1e-12));
      }
    }
  }
  const auto one = lyapunov_direct(DistributionSpec::point_mass(1.0), 0.2, config(10000, false));
  CHECK(one.value == doctest::Approx(std::log(1.2)).epsilon(1e-13));
}

TEST_CASE("eps = 1 equals E[log(1+Z)]") {
  const double oracle = log1p_moment(kAlpha2);
  const auto d = lyapunov_direct(kAlpha2, 1.0, config(400000));
  const auto i = lyapunov_invariant(kAlpha2, 1.0, config(400000));
  CHECK(std::abs(d.value - oracle) <= 4.0 * d.std_error);
  CHECK(std::abs(i.value - oracle) <= 4.0 * i.std_error);
}

TEST_CASE("direct and invariant estimators agree") {
  for (double eps : {0.3, 0.1}) {
    const auto d = lyapunov_direct(kAlpha2, eps, config(1000000));
    const auto i = lyapunov_invariant(kAlpha2, eps, config(1000000));
    CHECK(std::abs(d.value - i.value) <= 4.0 * combined(d.std_error, i.std_error));
    CHECK(i.value >= 0.0);
  }
}

TEST_CASE("start vector does not matter") {
  const auto a = lyapunov_direct(kAlpha2, 0.3, config(200000), Eigen::Vector2d(1.0, 1.0));
  const auto b = lyapunov_direct(kAlpha2, 0.3, config(200000), Eigen::Vector2d(1e-3, 5.0));
  CHECK(std::abs(a.value - b.value) <= 4.0 * combined(a.std_error, b.std_error));
}

TEST_CASE("invariant estimates decrease to 0 as eps -> 0") {
  const std::vector<double> grid{0.4, 0.2, 0.1, 0.05, 0.025};
  const auto est = lyapunov_invariant_grid(kAlpha2, grid, config(200000));
  for (std::size_t k = 1; k < est.size(); ++k) CHECK(est[k].value < est[k - 1].value);
  CHECK(est.back().value < 0.01);
  const auto single = lyapunov_invariant(kAlpha2, 0.2, [] {
    auto c = config(200000);
    c.eps = 0.2;
    return c;
  }());
  CHECK(single.value == est[1].value);
}

TEST_CASE("factorization identity") {
  const auto spec = DistributionSpec::two_point(Rational(1, 4), Rational(4), Rational(2, 3));
  const auto r = factorization_check(spec, 0.3, config(1000000, false));
  CHECK(std::abs(r.difference()) <= 4.0 * r.combined_se());

  const auto sym = DistributionSpec::two_point(Rational(1, 2), Rational(2), Rational(1, 2));
  CHECK(log_moment(sym) == 0.0);
  const auto s = factorization_check(sym, 0.3, config(400000, false));
  CHECK(s.log_moment == 0.0);
  CHECK(std::abs(s.difference()) <= 4.0 * s.combined_se());
}

TEST_CASE("parity") {
  const auto p = parity_check(kAlpha2, 0.3, config(100000));
  CHECK(p.invariant_plus.value == p.invariant_minus.value);
  CHECK(p.direct_plus.value == doctest::Approx(p.direct_minus.value).epsilon(1e-12));
}

TEST_CASE("log increments reproduce the estimates") {
  const auto inc = log_increments(kAlpha2, 0.3, 1000, 7, Method::invariant_formula);
  CHECK(inc.size() == 1000);
  CHECK(inc.front() == 0.0);  // chain starts at 0
  for (double v : inc) CHECK(v >= 0.0);
  CHECK(inc == log_increments(kAlpha2, 0.3, 1000, 7, Method::invariant_formula));
  const auto direct = log_increments(kAlpha2, 0.3, 1000, 7, Method::direct_product);
  CHECK(direct.size() == 1000);
}
