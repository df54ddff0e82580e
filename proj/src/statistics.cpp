#include "lyapexp/statistics.hpp"

#include "lyapexp/errors.hpp"

#include <algorithm>
#include <numeric>

namespace lyapexp {

std::vector<std::size_t> batch_sizes(std::size_t n, std::size_t batches) {
  if (batches == 0) throw InvalidArgument("batch count must be positive");
  std::vector<std::size_t> sizes(batches, n / batches);
  for (std::size_t b = 0; b < n % batches; ++b) ++sizes[b];
  return sizes;
}

std::size_t BatchSeries::samples() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double BatchSeries::mean() const {
  KahanSum sum;
  std::size_t total = 0;
  for (std::size_t b = 0; b < means.size(); ++b) {
    sum.add(means[b] * static_cast<double>(counts[b]));
    total += counts[b];
  }
  return total == 0 ? 0.0 : sum.value() / static_cast<double>(total);
}

double BatchSeries::std_error() const {
  const std::size_t nb = means.size();
  if (nb < 2) return 0.0;
  KahanSum sum;
  for (double m : means) sum.add(m);
  const double centre = sum.value() / static_cast<double>(nb);
  KahanSum sq;
  for (double m : means) sq.add((m - centre) * (m - centre));
  return std::sqrt(sq.value() / static_cast<double>(nb - 1) / static_cast<double>(nb));
}

BatchSeries combine(const BatchSeries& x, std::span<const BatchSeries> controls,
                    std::span<const double> coefficients) {
  BatchSeries out = x;
  for (std::size_t j = 0; j < controls.size(); ++j)
    for (std::size_t b = 0; b < out.means.size(); ++b) out.means[b] -= coefficients[j] * controls[j].means[b];
  return out;
}

LinearFit weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& weights) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (y.size() != n || weights.size() != n) throw InvalidArgument("regression inputs have mismatched sizes");
  if (n < p) throw InsufficientSignal("fewer observations than parameters");

  const Eigen::VectorXd root_w = weights.cwiseSqrt();
  const Eigen::MatrixXd a = root_w.asDiagonal() * design;
  const Eigen::VectorXd b = root_w.cwiseProduct(y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < p) throw InsufficientSignal("regression design is rank deficient");

  LinearFit fit;
  fit.coefficients = qr.solve(b);
  fit.covariance = (a.transpose() * a).inverse();
  const Eigen::VectorXd residual = y - design * fit.coefficients;
  fit.weighted_rss = (weights.array() * residual.array().square()).sum();
  const double ybar = (weights.array() * y.array()).sum() / weights.sum();
  const double tss = (weights.array() * (y.array() - ybar).square()).sum();
  fit.r_squared = tss > 0 ? 1.0 - fit.weighted_rss / tss : 1.0;
  fit.dof = static_cast<std::size_t>(n - p);
  return fit;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS statistic needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace lyapexp
