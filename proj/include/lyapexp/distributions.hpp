#pragma once

#include "lyapexp/random.hpp"
#include "lyapexp/rational.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lyapexp {

enum class Family { two_point, finite_discrete, uniform_interval, log_uniform };

std::string to_string(Family family);

struct Atom {
  double value = 0.0;
  double weight = 0.0;
  std::optional<Rational> exact_value;
  std::optional<Rational> exact_weight;
};

/// Law of the positive random factor Z. Immutable once built; constructors reject
/// non-positive support, weights not summing to one and deterministic laws.
class DistributionSpec {
 public:
  /// Finite law from exact (value, weight) pairs. Two atoms give Family::two_point.
  static DistributionSpec finite(const std::vector<std::pair<Rational, Rational>>& atoms);
  /// Finite law from floating (value, weight) pairs; weights must sum to 1 within 1e-12.
  static DistributionSpec finite(const std::vector<std::pair<double, double>>& atoms);
  /// Atoms {low, high} with P(Z = high) = p_high.
  static DistributionSpec two_point(const Rational& low, const Rational& high, const Rational& p_high);
  static DistributionSpec uniform_interval(double a, double b);
  /// log Z uniform on [log a, log b].
  static DistributionSpec log_uniform(double a, double b);
  /// Z == c almost surely. Violates the non-determinism invariant; only for oracle runs.
  static DistributionSpec point_mass(double c);

  Family family() const noexcept { return family_; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  bool is_finite() const noexcept {
    return family_ == Family::two_point || family_ == Family::finite_discrete;
  }
  /// True when every atom value and weight is an exact rational.
  bool is_exact() const noexcept;
  bool is_deterministic() const noexcept { return lower_ == upper_; }
  double ess_inf() const noexcept { return lower_; }
  double ess_sup() const noexcept { return upper_; }

  /// Law of 1/Z. Not representable for uniform_interval (throws InvalidSpec).
  DistributionSpec reciprocal() const;

  /// One draw, consuming exactly one uniform from rng.
  double draw(Rng& rng) const noexcept {
    const double u = rng.uniform();
    switch (family_) {
      case Family::uniform_interval:
        return lower_ + (upper_ - lower_) * u;
      case Family::log_uniform:
        return std::exp(log_lower_ + (log_upper_ - log_lower_) * u);
      default:
        for (std::size_t i = 0; i + 1 < values_.size(); ++i)
          if (u < cumulative_[i]) return values_[i];
        return values_.back();
    }
  }

  std::string describe() const;

 private:
  DistributionSpec() = default;
  void finalize();

  Family family_ = Family::finite_discrete;
  std::vector<Atom> atoms_;
  std::vector<double> values_;
  std::vector<double> cumulative_;
  double lower_ = 0.0;
  double upper_ = 0.0;
  double log_lower_ = 0.0;
  double log_upper_ = 0.0;
};

/// E[Z^gamma]; `exact` is set for exact finite laws at integer gamma.
struct MomentValue {
  double value = 0.0;
  std::optional<Rational> exact;
};

MomentValue moment(const DistributionSpec& spec, double gamma);
/// Exact E[Z^k], or nullopt when the law is not an exact finite law.
std::optional<Rational> exact_moment(const DistributionSpec& spec, unsigned k);
/// log E[Z^gamma], stable for large gamma.
double log_moment_power(const DistributionSpec& spec, double gamma);
/// E[log Z].
double log_moment(const DistributionSpec& spec);
/// E[log(1 + Z)]; the Lyapunov exponent at eps = 1.
double log1p_moment(const DistributionSpec& spec);

enum class AlphaKind { finite, infinite, zero_boundary };

struct AlphaResult {
  AlphaKind kind = AlphaKind::finite;
  double alpha = 0.0;      // +inf for infinite, 0 for zero_boundary
  double residual = 0.0;   // |E[Z^alpha] - 1|
  bool exact_integer = false;  // alpha is an integer confirmed with exact arithmetic
  /// E[Z^alpha] < 1 with E[Z^gamma] = +inf beyond alpha, i.e. the admissible set is
  /// (0, alpha]. Only possible for unbounded laws; reported, never resolved.
  bool closed_at_alpha = false;
};

/// Critical exponent: the positive root of E[Z^gamma] = 1, by bracketing and bisection.
AlphaResult solve_alpha(const DistributionSpec& spec, double tol = 1e-12);

/// n iid draws from stream (seed, 0).
std::vector<double> sample(const DistributionSpec& spec, std::uint64_t seed, std::size_t n);

struct AssumptionReport {
  bool positive = false;
  bool non_deterministic = false;
  bool negative_log_moment = false;
  bool delta_moment_finite = false;
  bool bounded_support = false;
  double sup_norm = 0.0;      // ||Z||_inf
  double log_moment = 0.0;    // E[log Z]

  bool all_pass() const noexcept {
    return positive && non_deterministic && negative_log_moment && delta_moment_finite;
  }
};

AssumptionReport validate_assumptions(const DistributionSpec& spec);

}  // namespace lyapexp
