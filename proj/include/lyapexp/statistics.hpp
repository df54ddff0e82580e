#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace lyapexp {

/// Neumaier-compensated running sum.
class KahanSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Running log(sum exp(v_i)), for sums of terms that overflow a double.
class LogSumExp {
 public:
  void add(double log_term) noexcept {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term <= max_) {
      scaled_.add(std::exp(log_term - max_));
    } else {
      const double rescale = std::exp(max_ - log_term);
      scaled_ = KahanSum{};
      scaled_.add(total_ * rescale);
      scaled_.add(1.0);
      max_ = log_term;
    }
    total_ = scaled_.value();
  }
  double value() const noexcept {
    return total_ > 0 ? max_ + std::log(total_) : -std::numeric_limits<double>::infinity();
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double total_ = 0.0;
  KahanSum scaled_;
};

/// Sizes of `batches` contiguous batches covering n samples; the first n % batches
/// batches get one extra sample.
std::vector<std::size_t> batch_sizes(std::size_t n, std::size_t batches);

/// Batch means of a correlated series. Independent replicas merge by concatenation.
struct BatchSeries {
  std::vector<double> means;
  std::vector<std::size_t> counts;

  void push(double batch_mean, std::size_t count) {
    means.push_back(batch_mean);
    counts.push_back(count);
  }
  void append(const BatchSeries& other) {
    means.insert(means.end(), other.means.begin(), other.means.end());
    counts.insert(counts.end(), other.counts.begin(), other.counts.end());
  }

  std::size_t size() const noexcept { return means.size(); }
  std::size_t samples() const noexcept;
  /// Count-weighted mean of all samples.
  double mean() const;
  /// Standard error of mean() from the spread of batch means.
  double std_error() const;
};

/// Mean and standard error of the batch means of x - sum_j c_j g_j, computed batch-wise.
BatchSeries combine(const BatchSeries& x, std::span<const BatchSeries> controls,
                    std::span<const double> coefficients);

struct LinearFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // (A^T W A)^{-1}
  double weighted_rss = 0.0;
  double r_squared = 0.0;      // weighted coefficient of determination
  std::size_t dof = 0;
};

/// Weighted least squares of y on the columns of `design` with weights w (typically
/// inverse variances). Solved through a column-pivoted QR of the scaled system.
LinearFit weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& weights);

/// Two-sample Kolmogorov-Smirnov statistic. Inputs need not be sorted.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace lyapexp
