#include "lyapexp/lyapunov.hpp"

#include "lyapexp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lyapexp {
namespace {

/// One renormalized step of v <- M v; returns log of the divisor.
inline double direct_step(double& v0, double& v1, double z, double eps) noexcept {
  const double a = v0 + eps * v1;
  const double b = (eps * z) * v0 + z * v1;
  const double norm = std::max(std::abs(a), std::abs(b));
  v0 = a / norm;
  v1 = b / norm;
  return std::log(norm);
}

LyapunovEstimate summarize(double eps, Method method, const BatchSeries& series, const ChainConfig& cfg) {
  LyapunovEstimate est;
  est.eps = eps;
  est.method = method;
  est.value = series.mean();
  est.std_error = series.std_error();
  est.n = series.samples();
  est.seed = cfg.run.seed;
  return est;
}

}  // namespace

std::string to_string(Method method) {
  return method == Method::direct_product ? "direct_product" : "invariant_formula";
}

LyapunovEstimate lyapunov_direct(const DistributionSpec& spec, double eps, const ChainConfig& cfg,
                                 const Eigen::Vector2d& start) {
  if (!std::isfinite(eps)) throw InvalidArgument("eps must be finite");
  if (!(start.minCoeff() > 0)) throw InvalidArgument("start vector must have positive entries");
  const auto plan = batch_plan(cfg);
  auto replica = [&](std::size_t r) {
    Rng rng(cfg.run.seed, r);
    double v0 = start(0), v1 = start(1);
    for (std::size_t i = 0; i < cfg.burn_in; ++i) direct_step(v0, v1, spec.draw(rng), eps);
    BatchSeries series;
    for (std::size_t count : plan[r]) {
      long double sum = 0;
      for (std::size_t i = 0; i < count; ++i) {
        double inc = 0;
        for (std::size_t t = 0; t < cfg.thinning; ++t) inc += direct_step(v0, v1, spec.draw(rng), eps);
        sum += inc;
      }
      series.push(static_cast<double>(sum / static_cast<long double>(count)), count);
    }
    return series;
  };
  BatchSeries merged;
  for (const auto& part : parallel_map(cfg.run.replicas, cfg.run.threads, replica)) merged.append(part);
  auto est = summarize(eps, Method::direct_product, merged, cfg);
  // increments are per thinned sample, which spans `thinning` matrices
  est.value /= static_cast<double>(cfg.thinning);
  est.std_error /= static_cast<double>(cfg.thinning);
  return est;
}

std::vector<LyapunovEstimate> lyapunov_invariant_grid(const DistributionSpec& spec, std::span<const double> grid,
                                                      const ChainConfig& cfg) {
  GridRequest request;
  request.truncation = default_truncation(spec);
  std::vector<LyapunovEstimate> out;
  for (const auto& p : run_grid(spec, grid, cfg, request))
    out.push_back(summarize(p.eps, Method::invariant_formula, p.log_term, cfg));
  return out;
}

LyapunovEstimate lyapunov_invariant(const DistributionSpec& spec, double eps, const ChainConfig& cfg) {
  return lyapunov_invariant_grid(spec, std::span<const double>(&eps, 1), cfg).front();
}

std::vector<double> log_increments(const DistributionSpec& spec, double eps, std::size_t n, std::uint64_t seed,
                                   Method method) {
  Rng rng(seed, 0);
  std::vector<double> out(n);
  if (method == Method::direct_product) {
    double v0 = 1.0, v1 = 1.0;
    for (auto& v : out) v = direct_step(v0, v1, spec.draw(rng), eps);
  } else {
    double x = 0.0;
    const double e2 = eps * eps;
    for (auto& v : out) {
      v = std::log1p(e2 * x);
      x = step(x, spec.draw(rng), eps);
    }
  }
  return out;
}

double lyapunov_point_mass(double c, double eps) {
  const double d = 1.0 - c;
  return std::log(0.5 * ((1.0 + c) + std::sqrt(d * d + 4.0 * eps * eps * c)));
}

double FactorizationReport::combined_se() const { return std::hypot(lhs_se, rhs_se); }

FactorizationReport factorization_check(const DistributionSpec& spec, double eps, const ChainConfig& cfg) {
  const auto reciprocal = spec.reciprocal();
  FactorizationReport r;
  const auto lhs = lyapunov_direct(spec, eps, cfg);
  const auto rhs = lyapunov_direct(reciprocal, eps, cfg);
  r.log_moment = log_moment(spec);
  r.lhs = lhs.value;
  r.lhs_se = lhs.std_error;
  r.rhs = r.log_moment + rhs.value;
  r.rhs_se = rhs.std_error;
  return r;
}

ParityReport parity_check(const DistributionSpec& spec, double eps, const ChainConfig& cfg) {
  ParityReport r;
  r.invariant_plus = lyapunov_invariant(spec, eps, cfg);
  r.invariant_minus = lyapunov_invariant(spec, -eps, cfg);
  r.direct_plus = lyapunov_direct(spec, eps, cfg);
  r.direct_minus = lyapunov_direct(spec, -eps, cfg);
  return r;
}

}  // namespace lyapexp
