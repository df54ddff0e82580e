#include "lyapexp/analysis.hpp"

#include "lyapexp/coefficients.hpp"
#include "lyapexp/errors.hpp"
#include "lyapexp/statistics.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace lyapexp {

ResidualSeries residual_series(const DistributionSpec& spec, int order, std::span<const double> grid,
                               const ChainConfig& cfg, bool control_variates) {
  if (order < 0) throw InvalidArgument("K must be nonnegative");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0)) throw InvalidArgument("eps grid must be positive");
    if (i > 0 && !(grid[i] < grid[i - 1])) throw InvalidArgument("eps grid must be strictly decreasing");
  }
  if (order >= 1 && !(moment(spec, order).value < 1.0)) throw KNotInA(order);
  const auto table = coefficients_for(spec, order);

  GridRequest request;
  request.truncation = default_truncation(spec);
  if (control_variates)
    for (int j = 1; j <= std::max(order, 1); ++j) request.control_moments.push_back(moment(spec, j).value);
  const std::size_t n_controls = request.control_moments.size();

  ResidualSeries series;
  series.order = order;
  series.sign = order % 2 == 0 ? 1 : -1;
  series.control_variates = control_variates;
  for (const auto& p : run_grid(spec, grid, cfg, request)) {
    BatchSeries estimate = p.log_term;
    if (n_controls > 0) {
      const Eigen::MatrixXd sxx = p.covariance.bottomRightCorner(n_controls, n_controls);
      const Eigen::VectorXd sxy = p.covariance.col(0).tail(n_controls);
      Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_controls));
      Eigen::LDLT<Eigen::MatrixXd> ldlt(sxx);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && sxx.diagonal().minCoeff() > 0) c = ldlt.solve(sxy);
      if (!c.allFinite()) c.setZero();
      estimate = combine(p.log_term, p.controls, std::span<const double>(c.data(), n_controls));
    }
    ResidualPoint pt;
    pt.eps = p.eps;
    pt.lambda = estimate.mean();
    pt.lambda_se = estimate.std_error();
    pt.regular = table.regular(p.eps);
    pt.residual = series.sign * (pt.lambda - pt.regular);
    pt.residual_se = pt.lambda_se;
    series.points.push_back(pt);
  }
  return series;
}

bool is_integer_alpha(const AlphaResult& alpha) {
  return alpha.kind == AlphaKind::finite && std::abs(alpha.alpha - std::round(alpha.alpha)) < 1e-6;
}

TheoryBracket theory_brackets(const DistributionSpec& spec, int order) {
  if (order < 0) throw InvalidArgument("K must be nonnegative");
  const auto alpha = solve_alpha(spec, 1e-10);
  TheoryBracket b;
  if (alpha.kind == AlphaKind::zero_boundary) throw InvalidSpec("E[log Z] >= 0: no expansion around eps = 0");
  if (alpha.kind == AlphaKind::infinite) {
    b.singular = false;
    b.alpha = alpha.alpha;
    b.regular_next_term = true;
    b.lower_exp = b.upper_exp = 2.0 * (order + 1);
    return b;
  }
  if (!std::isfinite(spec.ess_sup())) throw UnboundedSupport("theta and eta need a bounded law");
  b.alpha = alpha.alpha;
  b.integer_alpha = is_integer_alpha(alpha);
  if (b.integer_alpha) b.alpha = std::round(alpha.alpha);
  if (order >= b.alpha) throw KNotInA(order);

  const double ceil_alpha = b.integer_alpha ? b.alpha : std::ceil(b.alpha);
  b.eta = log_moment_power(spec, ceil_alpha) / std::log(spec.ess_sup());
  b.theta = ceil_alpha - b.eta;

  if (order + 1 < b.alpha) {
    b.regular_next_term = true;
    b.lower_exp = b.upper_exp = 2.0 * (order + 1);
  } else if (b.integer_alpha) {
    b.log_correction = true;
    b.lower_exp = b.upper_exp = 2.0 * b.alpha;
  } else {
    b.lower_exp = 2.0 * b.alpha;
    b.upper_exp = 2.0 * b.theta;
  }
  return b;
}

namespace {

ModelFit fit_model(const Eigen::VectorXd& log_eps, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  Eigen::MatrixXd design(log_eps.size(), 2);
  design.col(0).setOnes();
  design.col(1) = log_eps;
  const auto fit = weighted_least_squares(design, y, w);
  ModelFit m;
  m.log_constant = fit.coefficients(0);
  m.exponent = fit.coefficients(1);
  m.rss_per_dof = fit.dof > 0 ? fit.weighted_rss / static_cast<double>(fit.dof) : 0.0;
  m.exponent_se = std::sqrt(fit.covariance(1, 1) * std::max(1.0, m.rss_per_dof));
  m.r_squared = fit.r_squared;
  return m;
}

}  // namespace

FitResult fit_exponent(const ResidualSeries& series, const FitOptions& options) {
  FitResult result;
  result.points_total = series.points.size();
  std::vector<const ResidualPoint*> kept;
  for (const auto& p : series.points)
    if (p.residual > 0 && p.residual >= options.noise_floor * p.residual_se && p.eps > 0 && p.eps < 1)
      kept.push_back(&p);
  result.points_used = kept.size();
  if (kept.size() < options.min_points)
    throw InsufficientSignal(std::to_string(kept.size()) + " of " + std::to_string(series.points.size()) +
                             " grid points clear the noise floor, need " + std::to_string(options.min_points));

  const auto n = static_cast<Eigen::Index>(kept.size());
  Eigen::VectorXd log_eps(n), log_r(n), log_log(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = *kept[static_cast<std::size_t>(i)];
    log_eps(i) = std::log(p.eps);
    log_r(i) = std::log(p.residual);
    log_log(i) = std::log(-std::log(p.eps));
    const double rel = std::max(p.residual_se / p.residual, 1e-12);
    w(i) = 1.0 / (rel * rel);
  }
  result.power = fit_model(log_eps, log_r, w);
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    result.local_slopes.push_back((log_r(i + 1) - log_r(i)) / (log_eps(i + 1) - log_eps(i)));

  if (options.log_model) {
    const Eigen::VectorXd adjusted = log_r - log_log;
    result.log_model = fit_model(log_eps, adjusted, w);
    result.with_log_model = result.log_model->rss_per_dof <= result.power.rss_per_dof;
    if (options.fixed_exponent) {
      const Eigen::VectorXd c = adjusted - *options.fixed_exponent * log_eps;
      result.fixed_log_constant = (w.array() * c.array()).sum() / w.sum();
    }
  }
  return result;
}

LogGrowthFit fit_log_growth(std::span<const MomentScanRow> rows, bool truncated) {
  if (rows.size() < 3) throw InsufficientSignal("log-growth fit needs at least 3 grid points");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    design(i, 1) = -std::log(r.eps);
    y(i) = truncated ? r.truncated : r.moment;
    const double se = truncated ? r.truncated_se : r.moment_se;
    w(i) = se > 0 ? 1.0 / (se * se) : 1.0;
  }
  const auto weighted = weighted_least_squares(design, y, w);
  const auto plain = weighted_least_squares(design, y, Eigen::VectorXd::Ones(n));
  LogGrowthFit fit;
  fit.intercept = weighted.coefficients(0);
  fit.slope = weighted.coefficients(1);
  const double scale = weighted.dof > 0 ? std::max(1.0, weighted.weighted_rss / static_cast<double>(weighted.dof)) : 1.0;
  fit.slope_se = std::sqrt(weighted.covariance(1, 1) * scale);
  fit.weighted_r_squared = weighted.r_squared;
  fit.r_squared = plain.r_squared;
  return fit;
}

std::vector<double> dyadic_grid(int first, int last) {
  if (first > last) throw InvalidArgument("dyadic grid needs first <= last");
  std::vector<double> grid;
  for (int j = first; j <= last; ++j) grid.push_back(std::ldexp(1.0, -j));
  return grid;
}

}  // namespace lyapexp
