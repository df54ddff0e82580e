#include "doctest.h"

#include "lyapexp/chain.hpp"
#include "lyapexp/errors.hpp"

#include <algorithm>
#include <cmath>

using namespace lyapexp;

namespace {

const auto kAlpha2 = DistributionSpec::two_point(Rational(1, 2), Rational(2), Rational(1, 5));

ChainConfig config(double eps, std::size_t steps) {
  ChainConfig cfg;
  cfg.eps = eps;
  cfg.steps = steps;
  return cfg;
}

}  // namespace

TEST_CASE("step examples") {
  for (double x : {0.0, 0.3, 5.0, 1e6}) {
    CHECK(step(x, 0.7, 1.0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(step(x, 0.7, 0.0) == doctest::Approx(0.7 * (1.0 + x)).epsilon(1e-15));
  }
  for (double e : {0.0, 0.2, 1.0, -0.4}) CHECK(step(0.0, 1.3, e) == 1.3);
}

TEST_CASE("batch plan layout") {
  auto cfg = config(0.1, 1000);
  const auto plan = batch_plan(cfg);
  REQUIRE(plan.size() == cfg.run.replicas);
  std::size_t total = 0;
  for (const auto& r : plan) {
    CHECK(r.size() == cfg.batches / cfg.run.replicas);
    for (auto n : r) total += n;
  }
  CHECK(total == 1000);
  cfg.batches = 60;
  CHECK_THROWS_AS(batch_plan(cfg), InvalidArgument);
}

TEST_CASE("at eps = 1 the chain samples Z") {
  const std::vector<double> gammas{1.0, 2.0};
  const auto s = simulate_chain(kAlpha2, config(1.0, 200000), gammas);
  for (const auto& m : s.moments)
    CHECK(std::abs(m.moment - moment(kAlpha2, m.gamma).value) <= 4.0 * m.moment_se);
}

TEST_CASE("bounded support bound on the chain") {
  const std::vector<double> gammas{1.0};
  for (double eps : {0.5, 0.1, 0.03}) {
    const auto s = simulate_chain(kAlpha2, config(eps, 100000), gammas);
    CHECK(s.max_x <= 2.0 / (eps * eps));
    CHECK(s.moments[0].truncated == s.moments[0].moment);
  }
}

TEST_CASE("E[X_eps] tends to m1/(1-m1)") {
  const std::vector<double> gammas{1.0};
  const auto s = simulate_chain(kAlpha2, config(0.003, 2000000), gammas);
  CHECK(std::abs(s.moments[0].moment - 4.0) <= 4.0 * s.moments[0].moment_se);
}

TEST_CASE("grid runs match single runs") {
  const std::vector<double> gammas{1.0, 3.0};
  const std::vector<double> grid{0.25, 0.125};
  const auto cfg = config(0.25, 64000);
  const auto g = simulate_chain_grid(kAlpha2, grid, cfg, gammas);
  const auto a = simulate_chain(kAlpha2, cfg, gammas);
  CHECK(g[0].moments[0].moment == a.moments[0].moment);
  CHECK(g[0].moments[1].moment == a.moments[1].moment);
  CHECK(g[0].log_term == a.log_term);
}

TEST_CASE("results do not depend on the thread count") {
  const std::vector<double> gammas{2.0};
  auto cfg = config(0.2, 80000);
  const auto one = simulate_chain(kAlpha2, cfg, gammas);
  cfg.run.threads = 8;
  const auto eight = simulate_chain(kAlpha2, cfg, gammas);
  CHECK(one.moments[0].moment == eight.moments[0].moment);
  CHECK(one.moments[0].moment_se == eight.moments[0].moment_se);
  CHECK(one.log_term == eight.log_term);
}

TEST_CASE("X0 samples") {
  Rng rng(1, 0);
  CHECK(sample_x0(DistributionSpec::point_mass(0.5), rng) == doctest::Approx(1.0).epsilon(1e-14));

  const std::size_t n = 200000;
  const auto x = sample_x0(kAlpha2, 11, n);
  const auto y = sample_x0(kAlpha2, 12, n);
  // E[X0^g] = E[Z^g] E[(1+X0)^g] for g = 1/2, checked on independent draws.
  const double g = 0.5;
  const double mg = moment(kAlpha2, g).value;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::pow(x[i], g) - mg * std::pow(1.0 + y[i], g);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean) <= 4.0 * se);

  double s1 = 0.0, s2 = 0.0;
  for (double v : x) {
    s1 += v;
    s2 += v * v;
  }
  const double m = s1 / n;
  CHECK(std::abs(m - 4.0) <= 4.0 * std::sqrt((s2 / n - m * m) / n));
}

TEST_CASE("coupled paths are ordered pathwise") {
  const auto p = coupled_paths(kAlpha2, 0.1, 0.3, 100000, 5);
  std::size_t bad_eps = 0, bad_x0 = 0;
  for (std::size_t i = 0; i < p.low.size(); ++i) {
    bad_eps += p.high[i] > p.low[i];
    bad_x0 += p.low[i] > p.perpetuity[i];
  }
  CHECK(bad_eps == 0);
  CHECK(bad_x0 == 0);
  const auto same = coupled_paths(kAlpha2, 0.2, 0.2, 1000, 5);
  CHECK(same.low == same.high);
  const auto zero = coupled_paths(kAlpha2, 0.0, 0.4, 10000, 9);
  CHECK(zero.low == zero.perpetuity);
  for (std::size_t i = 0; i < zero.low.size(); ++i) REQUIRE(zero.high[i] <= zero.low[i]);
}

TEST_CASE("one more step preserves the invariant law") {
  const double eps = 0.2;
  const auto p = coupled_paths(kAlpha2, eps, eps, 400000, 21);
  Rng rng(77, 0);
  BatchSeries diff;
  const std::size_t burn = 10000, batch = (p.low.size() - burn) / 64;
  for (std::size_t b = 0; b < 64; ++b) {
    double acc = 0.0;
    for (std::size_t i = burn + b * batch; i < burn + (b + 1) * batch; ++i) {
      const double x = p.low[i];
      acc += std::sqrt(step(x, kAlpha2.draw(rng), eps)) - std::sqrt(x);
    }
    diff.push(acc / batch, batch);
  }
  CHECK(std::abs(diff.mean()) <= 4.0 * diff.std_error());
}

TEST_CASE("X_eps approaches X0 in distribution") {
  const std::size_t n = 20000;
  const auto x0 = sample_x0(kAlpha2, 3, n);
  std::vector<double> ks;
  for (double eps : {0.3, 0.1, 0.03, 0.0}) {
    const auto p = coupled_paths(kAlpha2, eps, eps, 10000 + 20 * n, 8);
    std::vector<double> xe;
    for (std::size_t i = 10000; i < p.low.size(); i += 20) xe.push_back(p.low[i]);
    ks.push_back(ks_statistic(xe, x0));
  }
  CHECK(ks[0] > ks[1]);
  CHECK(ks[1] > ks[2]);
  // the eps = 0 chain samples X0 itself: 1% critical value of the two-sample test
  CHECK(ks[3] < 1.63 * std::sqrt(2.0 / n));
}

TEST_CASE("moment scans") {
  const auto grid = std::vector<double>{0.25, 0.125, 0.0625, 0.03125};
  auto cfg = config(0.25, 400000);
  const auto low = moment_scan(kAlpha2, 1.0, grid, cfg);
  for (const auto& r : low) CHECK(r.moment <= 4.0 + 4.0 * r.moment_se);

  // E[Z^2] = 1: the truncated second moment grows as eps decreases
  const auto high = moment_scan(kAlpha2, 2.0, grid, cfg, 1.0);
  for (std::size_t i = 1; i < high.size(); ++i) CHECK(high[i].truncated > high[i - 1].truncated);
  for (const auto& r : high) CHECK(r.truncated <= r.moment);
}
