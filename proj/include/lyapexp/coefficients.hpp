#pragma once

// Regular-part coefficients of the Lyapunov exponent.
//
// For K in the admissible set, E[X_eps^l] = sum_k (-1)^k g(l,k) eps^{2k} + ..., and
// Lambda(eps) = sum_s (-1)^{s+1} ell(s) eps^{2s} + ... . The g table satisfies
//
//   g(l,s) = m_l / (1 - m_l) * sum_{i+k=s} sum_{r=0..l, (i,r) != (0,l)}
//                C(l,r) C(l+i-1,i) g(i+r,k),          g(0,k) = [k == 0],
//
// and ell(s) = sum_{j=1..s} g(j, s-j) / j. Everything here is templated on the
// scalar so the same recursion runs on exact rationals and on long double.

#include "lyapexp/distributions.hpp"
#include "lyapexp/errors.hpp"
#include "lyapexp/rational.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace lyapexp {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline double to_double(long double v) { return static_cast<double>(v); }
inline double to_double(double v) { return v; }

/// Moments m_0 = 1, m_1 = E[Z], ..., m_n = E[Z^n].
template <class Scalar>
struct MomentVector {
  std::vector<Scalar> m{Scalar(1)};

  MomentVector() = default;
  /// From (E[Z], ..., E[Z^n]).
  explicit MomentVector(const std::vector<Scalar>& from_first) {
    m.insert(m.end(), from_first.begin(), from_first.end());
  }

  int order() const noexcept { return static_cast<int>(m.size()) - 1; }
  const Scalar& operator[](int j) const { return m.at(static_cast<std::size_t>(j)); }
};

template <class Scalar>
struct CoefficientTable {
  int order = 0;        // K
  Matrix<Scalar> g;     // (K+1) x (K+1); g(l,k) meaningful for l + k <= K
  Vector<Scalar> ell;   // ell(s) at index s, ell(0) = 0 unused
  MomentVector<Scalar> moments;
  /// 1 / min_l |1 - m_l| over the orders used; large values flag near-degenerate input.
  double condition = 1.0;
};

/// Pascal triangle C(n, k) for n <= max_n.
template <class Scalar>
Matrix<Scalar> pascal_triangle(int max_n) {
  Matrix<Scalar> c = Matrix<Scalar>::Zero(max_n + 1, max_n + 1);
  for (int n = 0; n <= max_n; ++n) {
    c(n, 0) = Scalar(1);
    for (int k = 1; k <= n; ++k) c(n, k) = c(n - 1, k - 1) + (k <= n - 1 ? c(n - 1, k) : Scalar(0));
  }
  return c;
}

/// Fills g(l,k) for l >= 0, k >= 0, l + k <= K. `extra_horizon` widens the inner
/// summation range beyond s; the indicator i + k = s makes the extra terms vanish.
/// Throws DegenerateMoment(l) if m_l == 1 and UnstableMoment(l) if m_l > 1.
template <class Scalar>
CoefficientTable<Scalar> g_table(const MomentVector<Scalar>& moments, int order, int extra_horizon = 0) {
  if (order < 0) throw InvalidArgument("order must be nonnegative");
  if (moments.order() < order)
    throw InvalidArgument("need " + std::to_string(order) + " moments, got " +
                          std::to_string(moments.order()));

  CoefficientTable<Scalar> table;
  table.order = order;
  table.moments = moments;
  table.g = Matrix<Scalar>::Zero(order + 1, order + 1);
  table.ell = Vector<Scalar>::Zero(order + 1);
  table.g(0, 0) = Scalar(1);

  std::vector<Scalar> ratio(static_cast<std::size_t>(order) + 1, Scalar(0));
  double min_gap = std::numeric_limits<double>::infinity();
  for (int l = 1; l <= order; ++l) {
    const Scalar& ml = moments[l];
    if (ml == Scalar(1)) throw DegenerateMoment(l);
    if (ml > Scalar(1)) throw UnstableMoment(l);
    ratio[l] = ml / (Scalar(1) - ml);
    min_gap = std::min(min_gap, std::abs(to_double(Scalar(1) - ml)));
  }
  table.condition = order == 0 ? 1.0 : 1.0 / min_gap;

  const auto binom = pascal_triangle<Scalar>(2 * order + extra_horizon + 1);
  for (int s = 0; s <= order; ++s) {
    const int horizon = s + extra_horizon;
    for (int l = 1; l + s <= order; ++l) {
      Scalar acc(0);
      for (int i = 0; i <= horizon; ++i) {
        for (int k = 0; k <= horizon - i; ++k) {
          if (i + k != s) continue;
          for (int r = 0; r <= l; ++r) {
            if (i == 0 && r == l) continue;
            acc += binom(l, r) * binom(l + i - 1, i) * table.g(i + r, k);
          }
        }
      }
      table.g(l, s) = ratio[l] * acc;
    }
  }
  return table;
}

/// ell(s) = sum_{j+k=s, j>=1} g(j,k) / j for 1 <= s <= K.
template <class Scalar>
void fill_ell(CoefficientTable<Scalar>& table) {
  table.ell = Vector<Scalar>::Zero(table.order + 1);
  for (int s = 1; s <= table.order; ++s) {
    Scalar acc(0);
    for (int j = 1; j <= s; ++j) acc += table.g(j, s - j) / Scalar(j);
    table.ell(s) = acc;
  }
}

/// g table plus ell coefficients.
template <class Scalar>
CoefficientTable<Scalar> ell_coefficients(const MomentVector<Scalar>& moments, int order) {
  auto table = g_table(moments, order);
  fill_ell(table);
  return table;
}

/// sum_{k=1..K} (-1)^{k+1} ell(k) eps^{2k}, compensated.
template <class Scalar>
double regular_part(const CoefficientTable<Scalar>& table, double eps) {
  const double e2 = eps * eps;
  double power = 1.0;
  double sum = 0.0;
  double comp = 0.0;
  for (int k = 1; k <= table.order; ++k) {
    power *= e2;
    const double term = (k % 2 == 1 ? 1.0 : -1.0) * to_double(table.ell(k)) * power;
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Closed forms of the first two coefficients, used as cross-checks.
template <class Scalar>
Scalar ell1_closed_form(const Scalar& m1) {
  return m1 / (Scalar(1) - m1);
}

template <class Scalar>
Scalar ell2_closed_form(const Scalar& m1, const Scalar& m2) {
  const Scalar one(1);
  return ((one + m1) * (one + m1) * m2 + Scalar(2) * m1 * m1 * (one - m2)) /
         (Scalar(2) * (one - m1) * (one - m1) * (one - m2));
}

/// Moments of a law as exact rationals (exact finite laws only).
MomentVector<Rational> exact_moment_vector(const DistributionSpec& spec, int order);
/// Moments of any law in extended precision.
MomentVector<long double> float_moment_vector(const DistributionSpec& spec, int order);

/// Either an exact or an extended-precision table, whichever the law supports.
struct AnyCoefficientTable {
  std::optional<CoefficientTable<Rational>> exact;
  std::optional<CoefficientTable<long double>> approx;

  int order() const { return exact ? exact->order : approx->order; }
  double ell(int s) const { return exact ? to_double(exact->ell(s)) : to_double(approx->ell(s)); }
  double regular(double eps) const { return exact ? regular_part(*exact, eps) : regular_part(*approx, eps); }
};

/// Coefficients of `spec` up to order K, exact when the law allows it unless
/// `force_float` is set; throws InvalidSpec when `require_exact` cannot be honored.
AnyCoefficientTable coefficients_for(const DistributionSpec& spec, int order, bool require_exact = false,
                                     bool force_float = false);

}  // namespace lyapexp
