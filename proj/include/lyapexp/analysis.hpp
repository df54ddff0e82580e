#pragma once

#include "lyapexp/chain.hpp"
#include "lyapexp/distributions.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lyapexp {

struct ResidualPoint {
  double eps = 0.0;
  double lambda = 0.0;       // Monte Carlo Lambda(eps)
  double lambda_se = 0.0;
  double regular = 0.0;      // sum_{k<=K} (-1)^{k+1} ell_k eps^{2k}
  double residual = 0.0;     // sign * (lambda - regular)
  double residual_se = 0.0;
};

struct ResidualSeries {
  int order = 0;             // K
  int sign = 1;              // (-1)^{K+2}
  bool control_variates = false;
  std::vector<ResidualPoint> points;
};

/// R_K over a strictly decreasing grid, with common random numbers across the grid.
/// With control variates, Lambda is estimated as the mean of
/// log(1 + eps^2 x) - sum_j c_j (m_j ((1+x)/(1+eps^2 x))^j - x^j), j <= max(K, 1),
/// whose subtracted terms have mean zero under the invariant law.
/// Throws KNotInA when K >= 1 and E[Z^K] >= 1.
ResidualSeries residual_series(const DistributionSpec& spec, int order, std::span<const double> grid,
                               const ChainConfig& cfg, bool control_variates = true);

struct TheoryBracket {
  bool singular = true;        // false when alpha is infinite (no singularity)
  double alpha = 0.0;
  bool integer_alpha = false;
  /// Exponent interval for R_K: eps^upper << R_K <= C eps^lower (times log(1/eps)
  /// when log_correction).
  double lower_exp = 0.0;
  double upper_exp = 0.0;
  bool log_correction = false;
  /// K + 1 < alpha: R_K is led by the next regular term ell_{K+1} eps^{2K+2}.
  bool regular_next_term = false;
  double theta = 0.0;          // ceil(alpha) - log E[Z^ceil(alpha)] / log ||Z||_inf
  double eta = 0.0;            // log E[Z^ceil(alpha)] / log ||Z||_inf
};

/// Expected exponents of R_K for a bounded law. Throws UnboundedSupport for unbounded
/// laws and InvalidSpec when E[log Z] >= 0.
TheoryBracket theory_brackets(const DistributionSpec& spec, int order);

/// True when alpha (solved to 1e-10) is within 1e-6 of an integer.
bool is_integer_alpha(const AlphaResult& alpha);

struct FitOptions {
  double noise_floor = 4.0;      // drop points with |R| < noise_floor * se
  std::size_t min_points = 5;
  /// Integer alpha: also fit log R = log C + 2q log eps + log log(1/eps).
  bool log_model = false;
  /// Report C of the log model with 2q fixed at this value.
  std::optional<double> fixed_exponent;
};

struct ModelFit {
  double exponent = 0.0;         // 2q
  double exponent_se = 0.0;
  double log_constant = 0.0;     // log C
  double r_squared = 0.0;
  double rss_per_dof = 0.0;
};

struct FitResult {
  ModelFit power;                    // log R = log C + 2q log eps
  std::optional<ModelFit> log_model; // log R = log C + 2q log eps + log log(1/eps)
  bool with_log_model = false;       // log model preferred by residual sum per dof
  std::optional<double> fixed_log_constant;
  std::vector<double> local_slopes;  // between consecutive retained points
  std::size_t points_used = 0;
  std::size_t points_total = 0;
  std::optional<TheoryBracket> bracket;

  double exponent() const { return with_log_model ? log_model->exponent : power.exponent; }
  double exponent_se() const { return with_log_model ? log_model->exponent_se : power.exponent_se; }
};

/// Weighted log-log fits of a residual series, weights (R / se)^2. Throws
/// InsufficientSignal when fewer than min_points clear the noise floor.
FitResult fit_exponent(const ResidualSeries& series, const FitOptions& options = {});

struct LogGrowthFit {
  double intercept = 0.0;        // a
  double slope = 0.0;            // b
  double slope_se = 0.0;
  double r_squared = 0.0;        // unweighted
  double weighted_r_squared = 0.0;
};

/// E[X^gamma] ~ a + b log(1/eps) over a moment scan.
LogGrowthFit fit_log_growth(std::span<const MomentScanRow> rows, bool truncated = false);

/// Geometric grid 2^-first, ..., 2^-last (inclusive, decreasing).
std::vector<double> dyadic_grid(int first, int last);

}  // namespace lyapexp
