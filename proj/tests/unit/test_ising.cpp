#include "doctest.h"

#include "lyapexp/coefficients.hpp"
#include "lyapexp/errors.hpp"
#include "lyapexp/ising.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace lyapexp;

namespace {

ChainConfig config(std::size_t steps) {
  ChainConfig cfg;
  cfg.steps = steps;
  cfg.check_assumptions = false;
  return cfg;
}

IsingModel model(int range, std::vector<double> couplings, FieldLaw field, double temperature) {
  IsingModel m;
  m.range = range;
  m.couplings = std::move(couplings);
  m.field = std::move(field);
  m.temperature = temperature;
  return m;
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace

TEST_CASE("d = 1 transfer matrix is M_eps") {
  const auto a = transfer_matrix(1, {0.3}, 0.7);
  Eigen::Matrix2d m;
  m << 1.0, 0.3, 0.3 * 0.7, 0.7;
  CHECK(a.isApprox(m, 1e-15));
  const auto im = model(1, {1.2}, FieldLaw::constant(0.4), 2.0);
  Eigen::Matrix2d expected;
  const double e = std::exp(-1.2 / 2.0), z = std::exp(-0.4 / 2.0);
  expected << 1.0, e, e * z, z;
  CHECK(transfer_matrix(im, 0.4).isApprox(expected, 1e-15));
}

TEST_CASE("d = 2 transfer matrix by hand") {
  const double e1 = 0.3, e2 = 0.2, z = 0.6;
  Eigen::Matrix4d expected;
  expected << 1, e2, 0, 0,
              0, 0, e1, e1 * e2,
              z * e1 * e2, z * e1, 0, 0,
              0, 0, z * e2, z;
  CHECK(transfer_matrix(2, {e1, e2}, z).isApprox(expected, 1e-15));
}

TEST_CASE("structure: two nonzeros per row and column, shift pattern") {
  for (int d = 1; d <= 4; ++d) {
    std::vector<double> eps(static_cast<std::size_t>(d), 0.4);
    const auto a = transfer_matrix(d, eps, 1.3);
    const int n = 1 << d;
    for (int r = 0; r < n; ++r) {
      CHECK((a.row(r).array() != 0).count() == 2);
      CHECK((a.col(r).array() != 0).count() == 2);
      for (int c = 0; c < n; ++c) {
        // tau_2..tau_d must equal ups_1..ups_{d-1}
        const bool allowed = ((r << 1) & (n - 1)) == (c & ~1 & (n - 1)) || d == 1;
        if (!allowed) CHECK(a(r, c) == 0.0);
      }
    }
    const auto hot = transfer_matrix(d, std::vector<double>(static_cast<std::size_t>(d), 1.0), 1.0);
    for (Eigen::Index r = 0; r < hot.rows(); ++r)
      for (Eigen::Index c = 0; c < hot.cols(); ++c) CHECK((hot(r, c) == 0.0 || hot(r, c) == 1.0));
    CHECK(hot.sum() == 2.0 * n);
  }
}

TEST_CASE("ring partition function equals the trace of the transfer product") {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> field(0.0, 1.0);
  for (int d = 1; d <= 3; ++d) {
    const std::vector<double> couplings = d == 1 ? std::vector<double>{0.7}
                                        : d == 2 ? std::vector<double>{0.7, 0.3}
                                                 : std::vector<double>{0.7, 0.3, 1.1};
    const double temperature = 0.8;
    std::vector<double> h(10);
    for (auto& v : h) v = field(gen);
    auto m = model(d, couplings, FieldLaw::constant(0.0), temperature);
    Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(1 << d, 1 << d);
    for (double hn : h) prod = prod * transfer_matrix(m, hn);
    CHECK(prod.trace() == doctest::Approx(ring_partition_function(d, couplings, h, temperature)).epsilon(1e-12));
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(model(5, {1, 1, 1, 1, 1}, FieldLaw::constant(0), 1).validate(), InvalidSpec);
  CHECK_THROWS_AS(model(2, {1}, FieldLaw::constant(0), 1).validate(), InvalidSpec);
  CHECK_THROWS_AS(model(1, {-1}, FieldLaw::constant(0), 1).validate(), InvalidSpec);
  CHECK_THROWS_AS(model(1, {1}, FieldLaw::constant(0), 0).validate(), InvalidSpec);
  CHECK_NOTHROW(model(4, {1, 1, 1, 1}, FieldLaw::uniform(0, 1), 1).validate());
}

TEST_CASE("deterministic field: eigenvalue oracle") {
  const auto m = model(1, {0.9}, FieldLaw::constant(0.5), 0.7);
  const double eps = std::exp(-0.9 / 0.7), z = std::exp(-0.5 / 0.7);
  const double oracle = std::log(((1.0 + z) + std::sqrt((1.0 - z) * (1.0 - z) + 4.0 * eps * eps * z)) / 2.0);
  const auto f = free_energy(m, config(100000));
  CHECK(std::abs(f.value - oracle) <= std::max(4.0 * f.std_error, 1e-12));

  const auto m2 = model(2, {0.9, 0.4}, FieldLaw::constant(0.5), 0.7);
  const auto a = transfer_matrix(m2, 0.5);
  const double top = std::log(a.eigenvalues().cwiseAbs().maxCoeff());
  const auto f2 = free_energy(m2, config(100000));
  CHECK(f2.value == doctest::Approx(top).epsilon(1e-10));
}

TEST_CASE("decoupled spins: f = E[log(1+Z)]") {
  const auto field = FieldLaw::finite({{0.5, 0.25}, {-0.3, 0.75}});
  const auto m = model(1, {0.0}, field, 1.0);
  const double oracle = 0.25 * std::log1p(std::exp(-0.5)) + 0.75 * std::log1p(std::exp(0.3));
  const auto f = free_energy(m, config(200000));
  CHECK(std::abs(f.value - oracle) <= 4.0 * f.std_error);
}

TEST_CASE("d = 1 free energy is the 2x2 direct estimate") {
  const auto field = FieldLaw::finite({{0.4, 0.5}, {1.5, 0.5}});
  const auto m = model(1, {0.8}, field, 1.0);
  auto cfg = config(100000);
  const auto f = free_energy(m, cfg);
  const auto d = lyapunov_direct(m.z_law(), m.eps()[0], cfg);
  CHECK(f.value == d.value);
  CHECK(f.std_error == d.std_error);
}

TEST_CASE("trace and norm rates agree") {
  const auto m = model(2, {0.6, 0.3}, FieldLaw::uniform(-0.5, 1.0), 1.0);
  const auto r = trace_vs_norm(m, 100000, 5);
  CHECK(std::abs(r.trace_rate - r.norm_rate) < 4.0 * r.std_error);
}

TEST_CASE("blocks of the transfer matrix") {
  const auto m1 = model(1, {0.5}, FieldLaw::finite({{0.2, 0.5}, {0.9, 0.5}}), 1.0);
  const auto b1 = map_to_blocks(m1);
  CHECK(b1.dim() == 1);
  BlockSample s;
  const double t = std::exp(-0.5);
  b1.evaluate(t, 0.6, s);
  CHECK(s.L(0) == doctest::Approx(1.0));
  CHECK(s.C(0) == doctest::Approx(0.6));
  CHECK(s.N(0, 0) == doctest::Approx(0.6));

  const auto m2 = model(2, {0.5, 1.5}, FieldLaw::constant(0.2), 1.0);
  const auto ray = default_ray(m2);
  const auto b2 = map_to_blocks(m2, ray);
  CHECK(b2.dim() == 3);
  const double tt = std::exp(-0.5);
  b2.evaluate(tt, std::exp(-0.2), s);
  const auto a = transfer_matrix(m2, 0.2);
  CHECK((tt * s.L.transpose()).isApprox(a.block(0, 1, 1, 3), 1e-14));
  CHECK((tt * s.C).isApprox(a.block(1, 0, 3, 1), 1e-14));
  CHECK(s.N.isApprox(a.block(1, 1, 3, 3), 1e-14));
  CHECK(a(0, 0) == 1.0);
}

TEST_CASE("free energy agrees with the block engine") {
  const auto m = model(2, {0.5, 1.5}, FieldLaw::finite({{0.3, 0.5}, {1.0, 0.5}}), 1.0);
  const auto f = free_energy(m, config(400000));
  const auto ray = default_ray(m);
  const auto blocks = map_to_blocks(m, ray);
  const auto eps = m.eps();
  const double t = *std::max_element(eps.begin(), eps.end());
  const auto g = lyapunov_general(blocks, t, config(400000), Method::invariant_formula);
  CHECK(std::abs(f.value - g.value) <= 4.0 * combined(f.std_error, g.std_error));
}

TEST_CASE("strong coupling limit") {
  const auto stable = model(1, {60.0}, FieldLaw::finite({{0.5, 0.5}, {2.0, 0.5}}), 1.0);
  CHECK(free_energy(stable, config(100000)).value == doctest::Approx(0.0).scale(1e-3));
  const auto growing = model(1, {60.0}, FieldLaw::finite({{-1.0, 0.5}, {0.5, 0.5}}), 1.0);
  const auto f = free_energy(growing, config(400000));
  CHECK(std::abs(f.value - 0.25) <= 4.0 * f.std_error);
}

TEST_CASE("range-2 bonds at zero coupling reduce to d = 1") {
  const auto field = FieldLaw::finite({{0.3, 0.5}, {1.2, 0.5}});
  const auto d1 = free_energy(model(1, {0.7}, field, 1.0), config(400000));
  const auto d2 = free_energy(model(2, {0.7, 0.0}, field, 1.0), config(400000));
  CHECK(std::abs(d1.value - d2.value) <= 4.0 * combined(d1.std_error, d2.std_error));
}

TEST_CASE("d = 1 strong-coupling coefficient is ell_1") {
  const auto m = model(1, {1.0}, FieldLaw::finite({{0.5, 0.5}, {2.0, 0.5}}), 1.0);
  const auto ell1 = coefficients_for(m.z_law(), 1).ell(1);
  const auto ray = default_ray(m);
  std::vector<double> grid;
  for (int k = 1; k <= 8; ++k) grid.push_back(std::ldexp(1.0, -k));
  const auto report = strong_coupling_scan(m, ray, grid, 2, config(1000000));
  CHECK(report.predicted_q2 == doctest::Approx(ell1).epsilon(1e-12));
  REQUIRE(report.fit.powers.front() == 2);
  CHECK(std::abs(report.fit.coefficients[0] - ell1) <= 4.0 * report.fit.std_errors[0]);
}
