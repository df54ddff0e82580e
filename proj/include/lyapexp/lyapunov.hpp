#pragma once

#include "lyapexp/chain.hpp"
#include "lyapexp/distributions.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lyapexp {

enum class Method { direct_product, invariant_formula };

std::string to_string(Method method);

struct LyapunovEstimate {
  double eps = 0.0;
  Method method = Method::invariant_formula;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

/// Growth rate of M_n ... M_1 applied to `start` (positive entries), with M =
/// [[1, eps], [eps Z, Z]]. The vector is divided by its max-norm every step and the
/// logs of the divisors are averaged; the standard error comes from batch means of
/// those increments. Negative eps is allowed.
LyapunovEstimate lyapunov_direct(const DistributionSpec& spec, double eps, const ChainConfig& cfg,
                                 const Eigen::Vector2d& start = Eigen::Vector2d::Ones());

/// Ergodic average of log(1 + eps^2 x_n) along the invariant chain.
LyapunovEstimate lyapunov_invariant(const DistributionSpec& spec, double eps, const ChainConfig& cfg);

/// lyapunov_invariant over a grid with common random numbers.
std::vector<LyapunovEstimate> lyapunov_invariant_grid(const DistributionSpec& spec, std::span<const double> grid,
                                                      const ChainConfig& cfg);

/// Per-step terms from stream (seed, 0) without burn-in: log of the renormalization
/// divisor for the direct method (start vector of ones), log(1 + eps^2 x_{n-1}) for the
/// invariant method (chain started at 0).
std::vector<double> log_increments(const DistributionSpec& spec, double eps, std::size_t n, std::uint64_t seed,
                                   Method method);

/// Exact Lyapunov exponent of the constant matrix [[1, eps], [eps c, c]].
double lyapunov_point_mass(double c, double eps);

struct FactorizationReport {
  double lhs = 0.0;          // Lambda_Z(eps)
  double lhs_se = 0.0;
  double rhs = 0.0;          // E[log Z] + Lambda_{1/Z}(eps)
  double rhs_se = 0.0;
  double log_moment = 0.0;   // E[log Z]
  double difference() const { return lhs - rhs; }
  double combined_se() const;
};

/// Lambda_Z(eps) against E[log Z] + Lambda_{1/Z}(eps), both by the direct method.
FactorizationReport factorization_check(const DistributionSpec& spec, double eps, const ChainConfig& cfg);

struct ParityReport {
  LyapunovEstimate invariant_plus, invariant_minus;
  LyapunovEstimate direct_plus, direct_minus;
};

/// Estimates at eps and -eps with identical streams.
ParityReport parity_check(const DistributionSpec& spec, double eps, const ChainConfig& cfg);

}  // namespace lyapexp
