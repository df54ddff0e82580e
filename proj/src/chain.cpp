#include "lyapexp/chain.hpp"

#include "lyapexp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lyapexp {
namespace {

/// Batch-mean accumulator for x^gamma; log-space above gamma = 4.
class PowerBatch {
 public:
  explicit PowerBatch(double gamma) : gamma_(gamma), integer_(gamma == std::floor(gamma) && gamma <= 4) {}

  void add(double x) {
    if (gamma_ > 4) {
      if (x > 0) log_.add(gamma_ * std::log(x));
    } else {
      sum_ += power(x);
    }
  }
  double mean(std::size_t count) const {
    const double n = static_cast<double>(count);
    if (gamma_ > 4) return std::exp(log_.value() - std::log(n));
    return static_cast<double>(sum_ / n);
  }
  void reset() {
    sum_ = 0;
    log_ = LogSumExp{};
  }

 private:
  double power(double x) const {
    if (!integer_) return std::pow(x, gamma_);
    double p = 1.0;
    for (int i = 0; i < static_cast<int>(gamma_); ++i) p *= x;
    return p;
  }

  double gamma_;
  bool integer_;
  long double sum_ = 0;
  LogSumExp log_;
};

struct PointState {
  double eps = 0.0;
  double e2 = 0.0;
  double x = 0.0;
  double max_x = 0.0;
  long double log_sum = 0;
  std::vector<PowerBatch> moments, truncated;
  std::vector<long double> control_sums;
  // running sums of (log term, controls) and their cross products, whole replica
  Eigen::Matrix<long double, Eigen::Dynamic, 1> first;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> second;
  GridPoint out;
};

double validated_eps(double eps) {
  if (!std::isfinite(eps)) throw InvalidArgument("eps must be finite");
  return eps;
}

GridPoint run_replica_point_merge(std::vector<GridPoint>& parts) {
  GridPoint merged = parts.front();
  for (std::size_t r = 1; r < parts.size(); ++r) {
    const auto& p = parts[r];
    merged.log_term.append(p.log_term);
    for (std::size_t g = 0; g < merged.moments.size(); ++g) {
      merged.moments[g].append(p.moments[g]);
      merged.truncated[g].append(p.truncated[g]);
    }
    for (std::size_t j = 0; j < merged.controls.size(); ++j) merged.controls[j].append(p.controls[j]);
    merged.covariance += p.covariance;
    merged.max_x = std::max(merged.max_x, p.max_x);
    merged.samples += p.samples;
  }
  return merged;
}

}  // namespace

std::vector<std::vector<std::size_t>> batch_plan(const ChainConfig& cfg) {
  const std::size_t replicas = cfg.run.replicas;
  if (replicas == 0) throw InvalidArgument("replica count must be positive");
  if (cfg.batches == 0 || cfg.batches % replicas != 0)
    throw InvalidArgument("batch count " + std::to_string(cfg.batches) + " is not a positive multiple of " +
                          std::to_string(replicas) + " replicas");
  if (cfg.thinning == 0) throw InvalidArgument("thinning must be positive");
  if (cfg.steps < cfg.batches) throw InvalidArgument("need at least one step per batch");
  const std::size_t per_replica = cfg.batches / replicas;
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t steps : batch_sizes(cfg.steps, replicas)) plan.push_back(batch_sizes(steps, per_replica));
  return plan;
}

double default_truncation(const DistributionSpec& spec) {
  return std::isfinite(spec.ess_sup()) ? 2.0 * spec.ess_sup() : 1.0;
}

std::vector<GridPoint> run_grid(const DistributionSpec& spec, std::span<const double> grid, const ChainConfig& cfg,
                                const GridRequest& request) {
  if (grid.empty()) throw InvalidArgument("empty eps grid");
  if (cfg.check_assumptions && !validate_assumptions(spec).all_pass())
    throw InvalidSpec("law " + spec.describe() + " violates the chain assumptions (need E[log Z] < 0)");
  for (double g : request.gammas)
    if (!(g >= 0)) throw InvalidArgument("moment orders must be nonnegative");
  const auto plan = batch_plan(cfg);
  const std::size_t n_controls = request.control_moments.size();
  const double truncation = request.truncation;

  auto replica = [&](std::size_t r) {
    Rng rng(cfg.run.seed, r);
    std::vector<PointState> points(grid.size());
    for (std::size_t e = 0; e < grid.size(); ++e) {
      auto& p = points[e];
      p.eps = validated_eps(grid[e]);
      p.e2 = p.eps * p.eps;
      for (double g : request.gammas) {
        p.moments.emplace_back(g);
        p.truncated.emplace_back(g);
      }
      p.control_sums.assign(n_controls, 0);
      p.first = decltype(p.first)::Zero(n_controls + 1);
      p.second = decltype(p.second)::Zero(n_controls + 1, n_controls + 1);
      p.out.eps = p.eps;
      p.out.moments.resize(request.gammas.size());
      p.out.truncated.resize(request.gammas.size());
      p.out.controls.resize(n_controls);
    }

    for (std::size_t i = 0; i < cfg.burn_in; ++i) {
      const double z = spec.draw(rng);
      for (auto& p : points) p.x = step(p.x, z, p.eps);
    }

    std::vector<long double> row(n_controls + 1);
    for (std::size_t count : plan[r]) {
      for (std::size_t i = 0; i < count; ++i) {
        for (auto& p : points) {
          const double x = p.x;
          p.max_x = std::max(p.max_x, x);
          const double term = std::log1p(p.e2 * x);
          p.log_sum += term;
          const bool inside = p.e2 * x <= truncation;
          for (std::size_t g = 0; g < p.moments.size(); ++g) {
            p.moments[g].add(x);
            if (inside) p.truncated[g].add(x);
          }
          if (n_controls > 0) {
            row[0] = term;
            const double ratio = (1.0 + x) / (1.0 + p.e2 * x);
            double rp = 1.0, xp = 1.0;
            for (std::size_t j = 0; j < n_controls; ++j) {
              rp *= ratio;
              xp *= x;
              const double c = request.control_moments[j] * rp - xp;
              p.control_sums[j] += c;
              row[j + 1] = c;
            }
            for (std::size_t a = 0; a <= n_controls; ++a) {
              p.first(a) += row[a];
              for (std::size_t b = 0; b <= a; ++b) p.second(a, b) += row[a] * row[b];
            }
          }
        }
        for (std::size_t t = 0; t < cfg.thinning; ++t) {
          const double z = spec.draw(rng);
          for (auto& p : points) p.x = step(p.x, z, p.eps);
        }
      }
      const long double n = static_cast<long double>(count);
      for (auto& p : points) {
        p.out.log_term.push(static_cast<double>(p.log_sum / n), count);
        p.log_sum = 0;
        for (std::size_t g = 0; g < p.moments.size(); ++g) {
          p.out.moments[g].push(p.moments[g].mean(count), count);
          p.out.truncated[g].push(p.truncated[g].mean(count), count);
          p.moments[g].reset();
          p.truncated[g].reset();
        }
        for (std::size_t j = 0; j < n_controls; ++j) {
          p.out.controls[j].push(static_cast<double>(p.control_sums[j] / n), count);
          p.control_sums[j] = 0;
        }
        p.out.samples += count;
      }
    }

    std::vector<GridPoint> result;
    for (auto& p : points) {
      p.out.max_x = p.max_x;
      // raw sums for now; centred after the merge
      Eigen::MatrixXd raw(n_controls + 1, n_controls + 2);
      for (std::size_t a = 0; a <= n_controls; ++a) {
        raw(a, 0) = static_cast<double>(p.first(a));
        for (std::size_t b = 0; b <= n_controls; ++b)
          raw(a, b + 1) = static_cast<double>(a >= b ? p.second(a, b) : p.second(b, a));
      }
      p.out.covariance = raw;
      result.push_back(std::move(p.out));
    }
    return result;
  };

  auto parts = parallel_map(cfg.run.replicas, cfg.run.threads, replica);
  std::vector<GridPoint> out;
  for (std::size_t e = 0; e < grid.size(); ++e) {
    std::vector<GridPoint> column;
    for (auto& part : parts) column.push_back(std::move(part[e]));
    GridPoint merged = run_replica_point_merge(column);
    const double n = static_cast<double>(merged.samples);
    const Eigen::VectorXd mean = merged.covariance.col(0) / n;
    const Eigen::MatrixXd second = merged.covariance.rightCols(n_controls + 1) / n;
    merged.covariance = second - mean * mean.transpose();
    out.push_back(std::move(merged));
  }
  return out;
}

namespace {

ChainStats to_stats(const GridPoint& p, std::span<const double> gammas, double truncation) {
  ChainStats s;
  s.eps = p.eps;
  s.truncation = truncation;
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    s.moments.push_back({gammas[g], p.moments[g].mean(), p.moments[g].std_error(), p.truncated[g].mean(),
                         p.truncated[g].std_error()});
  }
  s.log_term = p.log_term.mean();
  s.log_term_se = p.log_term.std_error();
  s.max_x = p.max_x;
  s.samples = p.samples;

  // standard error from the first half of the batches should exceed the full one
  BatchSeries half;
  for (std::size_t b = 0; b < p.log_term.size() / 2; ++b) half.push(p.log_term.means[b], p.log_term.counts[b]);
  if (half.size() >= 2) s.non_convergence = s.log_term_se > half.std_error();
  return s;
}

}  // namespace

std::vector<ChainStats> simulate_chain_grid(const DistributionSpec& spec, std::span<const double> grid,
                                            const ChainConfig& cfg, std::span<const double> gammas,
                                            std::optional<double> truncation) {
  GridRequest request;
  request.gammas.assign(gammas.begin(), gammas.end());
  request.truncation = truncation.value_or(default_truncation(spec));
  if (!(request.truncation > 0)) throw InvalidArgument("truncation level B must be positive");
  std::vector<ChainStats> out;
  for (const auto& p : run_grid(spec, grid, cfg, request)) out.push_back(to_stats(p, gammas, request.truncation));
  return out;
}

ChainStats simulate_chain(const DistributionSpec& spec, const ChainConfig& cfg, std::span<const double> gammas,
                          std::optional<double> truncation) {
  const double eps = cfg.eps;
  return simulate_chain_grid(spec, std::span<const double>(&eps, 1), cfg, gammas, truncation).front();
}

double sample_x0(const DistributionSpec& spec, Rng& rng, double trunc_tol) {
  double sum = 0.0;
  double product = 1.0;
  int small = 0;
  for (std::size_t n = 0; n < 10'000'000; ++n) {
    product *= spec.draw(rng);
    sum += product;
    if (product < trunc_tol * sum) {
      if (++small >= 50) return sum;
    } else {
      small = 0;
    }
  }
  throw TruncationOverflow("perpetuity series did not settle within 10^7 terms (E[log Z] close to 0?)");
}

std::vector<double> sample_x0(const DistributionSpec& spec, std::uint64_t seed, std::size_t count, double trunc_tol) {
  Rng rng(seed, 0);
  std::vector<double> out(count);
  for (auto& v : out) v = sample_x0(spec, rng, trunc_tol);
  return out;
}

CoupledPaths coupled_paths(const DistributionSpec& spec, double eps, double eps_prime, std::size_t n,
                           std::uint64_t seed) {
  if (!(eps >= 0) || !(eps_prime >= eps)) throw InvalidArgument("coupled paths need 0 <= eps <= eps'");
  Rng rng(seed, 0);
  CoupledPaths paths;
  paths.low.reserve(n);
  paths.high.reserve(n);
  paths.perpetuity.reserve(n);
  double lo = 0.0, hi = 0.0, zero = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = spec.draw(rng);
    lo = step(lo, z, eps);
    hi = step(hi, z, eps_prime);
    zero = step(zero, z, 0.0);
    paths.low.push_back(lo);
    paths.high.push_back(hi);
    paths.perpetuity.push_back(zero);
  }
  return paths;
}

std::vector<MomentScanRow> moment_scan(const DistributionSpec& spec, double gamma, std::span<const double> grid,
                                       const ChainConfig& cfg, std::optional<double> truncation) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0)) throw InvalidArgument("moment scan grid must be positive");
    if (i > 0 && !(grid[i] < grid[i - 1])) throw InvalidArgument("moment scan grid must be strictly decreasing");
  }
  const double g = gamma;
  std::vector<MomentScanRow> rows;
  for (const auto& s : simulate_chain_grid(spec, grid, cfg, std::span<const double>(&g, 1), truncation)) {
    const auto& m = s.moments.front();
    rows.push_back({s.eps, m.moment, m.moment_se, m.truncated, m.truncated_se, s.max_x});
  }
  return rows;
}

}  // namespace lyapexp
