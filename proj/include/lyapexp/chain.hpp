#pragma once

#include "lyapexp/distributions.hpp"
#include "lyapexp/parallel.hpp"
#include "lyapexp/statistics.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lyapexp {

/// x -> z (1 + x) / (1 + eps^2 x). Nonnegative, at most z (1 + x), and at most
/// z / eps^2 for eps > 0.
inline double step(double x, double z, double eps) noexcept {
  return (z + z * x) / (1.0 + eps * eps * x);
}

struct ChainConfig {
  double eps = 0.1;
  std::size_t burn_in = 10'000;
  /// Post-burn-in steps summed over all replicas.
  std::size_t steps = 1'000'000;
  std::size_t thinning = 1;
  /// Batch-means batches summed over all replicas; must be a multiple of replicas.
  std::size_t batches = 64;
  RunLayout run;
  /// Refuse laws that fail validate_assumptions. Oracle runs turn this off.
  bool check_assumptions = true;
};

struct MomentEstimate {
  double gamma = 0.0;
  double moment = 0.0;
  double moment_se = 0.0;
  double truncated = 0.0;     // E[X^gamma 1{eps^2 X <= B}]
  double truncated_se = 0.0;
};

struct ChainStats {
  double eps = 0.0;
  double truncation = 0.0;    // B
  std::vector<MomentEstimate> moments;
  double log_term = 0.0;      // E[log(1 + eps^2 X)]
  double log_term_se = 0.0;
  double max_x = 0.0;
  std::size_t samples = 0;
  /// Batch-means standard error of log_term did not shrink from half the batches to all.
  bool non_convergence = false;
};

/// Recorded steps of every batch of every replica, from cfg.steps, cfg.batches and
/// cfg.run.replicas. Throws InvalidArgument on an inconsistent layout.
std::vector<std::vector<std::size_t>> batch_plan(const ChainConfig& cfg);

/// What a lockstep grid run records at each eps.
struct GridRequest {
  std::vector<double> gammas;
  double truncation = 1.0;
  /// m_1..m_J: record the mean-zero controls m_j ((1+x)/(1+eps^2 x))^j - x^j.
  std::vector<double> control_moments;
};

struct GridPoint {
  double eps = 0.0;
  BatchSeries log_term;
  std::vector<BatchSeries> moments;
  std::vector<BatchSeries> truncated;
  std::vector<BatchSeries> controls;
  /// Per-sample covariance of (log term, control_1, ..., control_J).
  Eigen::MatrixXd covariance;
  double max_x = 0.0;
  std::size_t samples = 0;
};

/// Runs one chain per eps of `grid` in lockstep on every replica, all chains of a
/// replica consuming the same Z stream (seed, r). Statistics are taken at the state
/// reached after burn-in and after every `thinning` further steps. Replicas merge in
/// index order.
std::vector<GridPoint> run_grid(const DistributionSpec& spec, std::span<const double> grid, const ChainConfig& cfg,
                                const GridRequest& request);

/// Default truncation level: 2 ||Z||_inf for bounded laws.
double default_truncation(const DistributionSpec& spec);

/// Ergodic statistics of the chain x_{n+1} = step(x_n, Z_{n+1}, eps) started at 0.
ChainStats simulate_chain(const DistributionSpec& spec, const ChainConfig& cfg, std::span<const double> gammas,
                          std::optional<double> truncation = std::nullopt);

/// simulate_chain at every eps of `grid` (cfg.eps ignored), all chains driven by the
/// same Z stream per replica.
std::vector<ChainStats> simulate_chain_grid(const DistributionSpec& spec, std::span<const double> grid,
                                            const ChainConfig& cfg, std::span<const double> gammas,
                                            std::optional<double> truncation = std::nullopt);

/// One draw of X_0 = sum_n Z_1...Z_n, truncated once the running product stays below
/// trunc_tol times the partial sum for 50 consecutive terms. The result approximates
/// X_0 from below. Throws TruncationOverflow past 10^7 terms.
double sample_x0(const DistributionSpec& spec, Rng& rng, double trunc_tol = 1e-16);
std::vector<double> sample_x0(const DistributionSpec& spec, std::uint64_t seed, std::size_t count,
                              double trunc_tol = 1e-16);

struct CoupledPaths {
  std::vector<double> low;          // chain at eps
  std::vector<double> high;         // chain at eps' >= eps
  std::vector<double> perpetuity;   // eps = 0 chain: partial sums Z_n + Z_n Z_{n-1} + ...
};

/// Chains at eps <= eps_prime and at 0 driven by one Z stream, all started at 0.
CoupledPaths coupled_paths(const DistributionSpec& spec, double eps, double eps_prime, std::size_t n,
                           std::uint64_t seed);

struct MomentScanRow {
  double eps = 0.0;
  double moment = 0.0;
  double moment_se = 0.0;
  double truncated = 0.0;
  double truncated_se = 0.0;
  double max_x = 0.0;
};

/// E[X_eps^gamma] and its truncated version across a strictly decreasing eps grid.
std::vector<MomentScanRow> moment_scan(const DistributionSpec& spec, double gamma, std::span<const double> grid,
                                       const ChainConfig& cfg, std::optional<double> truncation = std::nullopt);

}  // namespace lyapexp
