#include "lyapexp/distributions.hpp"

#include "lyapexp/errors.hpp"
#include "lyapexp/statistics.hpp"

#include <boost/integer/common_factor_rt.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

namespace lyapexp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Sign of E[log Z] for exact finite laws whose weights share a small common
/// denominator D: E[log Z] has the sign of log prod v_i^{D w_i}.
std::optional<int> exact_log_moment_sign(const DistributionSpec& spec) {
  if (!spec.is_exact()) return std::nullopt;
  BigInt den = 1;
  for (const auto& a : spec.atoms()) {
    const BigInt d = boost::multiprecision::denominator(*a.exact_weight);
    den = den / boost::multiprecision::gcd(den, d) * d;
    if (den > 4096) return std::nullopt;
  }
  Rational product(1);
  for (const auto& a : spec.atoms()) {
    const Rational power = *a.exact_weight * Rational(den);
    product *= pow(*a.exact_value, power.convert_to<unsigned>());
  }
  if (product == 1) return 0;
  return product > 1 ? 1 : -1;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::two_point: return "two_point";
    case Family::finite_discrete: return "finite_discrete";
    case Family::uniform_interval: return "uniform_interval";
    case Family::log_uniform: return "log_uniform";
  }
  return "unknown";
}

DistributionSpec DistributionSpec::finite(const std::vector<std::pair<Rational, Rational>>& atoms) {
  std::map<Rational, Rational> merged;
  Rational total(0);
  for (const auto& [value, weight] : atoms) {
    if (value <= 0) throw InvalidSpec("atom " + to_string(value) + " is not positive");
    if (weight < 0) throw InvalidSpec("negative weight " + to_string(weight));
    total += weight;
    if (weight > 0) merged[value] += weight;
  }
  if (total != 1) throw InvalidSpec("weights sum to " + to_string(total) + ", not 1");
  DistributionSpec spec;
  for (const auto& [value, weight] : merged)
    spec.atoms_.push_back({to_double(value), to_double(weight), value, weight});
  if (spec.atoms_.size() < 2) throw InvalidSpec("law is deterministic (single atom)");
  spec.family_ = spec.atoms_.size() == 2 ? Family::two_point : Family::finite_discrete;
  spec.finalize();
  return spec;
}

DistributionSpec DistributionSpec::finite(const std::vector<std::pair<double, double>>& atoms) {
  std::map<double, double> merged;
  KahanSum total;
  for (const auto& [value, weight] : atoms) {
    if (!(value > 0) || !std::isfinite(value)) throw InvalidSpec("atom " + fmt(value) + " is not positive and finite");
    if (!(weight >= 0) || !std::isfinite(weight)) throw InvalidSpec("invalid weight " + fmt(weight));
    total.add(weight);
    if (weight > 0) merged[value] += weight;
  }
  if (std::abs(total.value() - 1.0) > 1e-12) throw InvalidSpec("weights sum to " + fmt(total.value()) + ", not 1");
  DistributionSpec spec;
  for (const auto& [value, weight] : merged) spec.atoms_.push_back({value, weight / total.value(), {}, {}});
  if (spec.atoms_.size() < 2) throw InvalidSpec("law is deterministic (single atom)");
  spec.family_ = spec.atoms_.size() == 2 ? Family::two_point : Family::finite_discrete;
  spec.finalize();
  return spec;
}

DistributionSpec DistributionSpec::two_point(const Rational& low, const Rational& high, const Rational& p_high) {
  if (p_high <= 0 || p_high >= 1) throw InvalidSpec("p_high must lie in (0, 1)");
  if (low == high) throw InvalidSpec("law is deterministic (equal atoms)");
  return finite({{low, Rational(1) - p_high}, {high, p_high}});
}

DistributionSpec DistributionSpec::uniform_interval(double a, double b) {
  if (!(a > 0) || !(b > a) || !std::isfinite(b)) throw InvalidSpec("uniform_interval needs 0 < a < b < inf");
  DistributionSpec spec;
  spec.family_ = Family::uniform_interval;
  spec.lower_ = a;
  spec.upper_ = b;
  return spec;
}

DistributionSpec DistributionSpec::log_uniform(double a, double b) {
  if (!(a > 0) || !(b > a) || !std::isfinite(b)) throw InvalidSpec("log_uniform needs 0 < a < b < inf");
  DistributionSpec spec;
  spec.family_ = Family::log_uniform;
  spec.lower_ = a;
  spec.upper_ = b;
  spec.log_lower_ = std::log(a);
  spec.log_upper_ = std::log(b);
  return spec;
}

DistributionSpec DistributionSpec::point_mass(double c) {
  if (!(c > 0) || !std::isfinite(c)) throw InvalidSpec("point mass must be positive and finite");
  DistributionSpec spec;
  spec.family_ = Family::finite_discrete;
  spec.atoms_.push_back({c, 1.0, {}, {}});
  spec.finalize();
  return spec;
}

void DistributionSpec::finalize() {
  values_.clear();
  cumulative_.clear();
  Rational exact_cum(0);
  double cum = 0.0;
  const bool exact = is_exact();
  for (const auto& a : atoms_) {
    values_.push_back(a.value);
    if (exact) {
      exact_cum += *a.exact_weight;
      cumulative_.push_back(to_double(exact_cum));
    } else {
      cum += a.weight;
      cumulative_.push_back(cum);
    }
  }
  cumulative_.back() = 1.0;
  lower_ = atoms_.front().value;
  upper_ = atoms_.back().value;
}

bool DistributionSpec::is_exact() const noexcept {
  if (!is_finite() || atoms_.empty()) return false;
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [](const Atom& a) { return a.exact_value.has_value() && a.exact_weight.has_value(); });
}

DistributionSpec DistributionSpec::reciprocal() const {
  switch (family_) {
    case Family::uniform_interval:
      throw InvalidSpec("the reciprocal of a uniform law is not a supported family");
    case Family::log_uniform:
      return log_uniform(1.0 / upper_, 1.0 / lower_);
    default:
      break;
  }
  if (is_deterministic()) return point_mass(1.0 / lower_);
  if (is_exact()) {
    std::vector<std::pair<Rational, Rational>> atoms;
    for (const auto& a : atoms_) atoms.emplace_back(Rational(1) / *a.exact_value, *a.exact_weight);
    return finite(atoms);
  }
  std::vector<std::pair<double, double>> atoms;
  for (const auto& a : atoms_) atoms.emplace_back(1.0 / a.value, a.weight);
  return finite(atoms);
}

std::string DistributionSpec::describe() const {
  std::ostringstream os;
  os << to_string(family_);
  if (is_finite()) {
    os << "{";
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      if (i) os << ", ";
      if (a.exact_value)
        os << to_string(*a.exact_value) << ":" << to_string(*a.exact_weight);
      else
        os << fmt(a.value) << ":" << fmt(a.weight);
    }
    os << "}";
  } else {
    os << "(" << fmt(lower_) << ", " << fmt(upper_) << ")";
  }
  return os.str();
}

std::optional<Rational> exact_moment(const DistributionSpec& spec, unsigned k) {
  if (!spec.is_exact()) return std::nullopt;
  Rational sum(0);
  for (const auto& a : spec.atoms()) sum += *a.exact_weight * pow(*a.exact_value, k);
  return sum;
}

double log_moment_power(const DistributionSpec& spec, double gamma) {
  if (!(gamma >= 0)) throw InvalidArgument("moment order must be nonnegative");
  if (gamma == 0) return 0.0;
  switch (spec.family()) {
    case Family::uniform_interval: {
      const double a = spec.ess_inf(), b = spec.ess_sup();
      const double g1 = gamma + 1.0;
      return g1 * std::log(b) + std::log(-std::expm1(g1 * std::log(a / b))) - std::log(g1) - std::log(b - a);
    }
    case Family::log_uniform: {
      const double la = std::log(spec.ess_inf()), lb = std::log(spec.ess_sup());
      const double t = gamma * (lb - la);
      return gamma * lb + std::log(-std::expm1(-t)) - std::log(t);
    }
    default: {
      LogSumExp acc;
      for (const auto& a : spec.atoms()) acc.add(std::log(a.weight) + gamma * std::log(a.value));
      return acc.value();
    }
  }
}

MomentValue moment(const DistributionSpec& spec, double gamma) {
  if (!(gamma >= 0)) throw InvalidArgument("moment order must be nonnegative");
  MomentValue out;
  if (gamma == 0) {
    out.value = 1.0;
    if (spec.is_exact()) out.exact = Rational(1);
    return out;
  }
  if (spec.is_exact() && gamma == std::floor(gamma) && gamma <= 4096) {
    out.exact = exact_moment(spec, static_cast<unsigned>(gamma));
    out.value = to_double(*out.exact);
    return out;
  }
  if (spec.is_finite()) {
    KahanSum sum;
    for (const auto& a : spec.atoms()) sum.add(a.weight * std::pow(a.value, gamma));
    out.value = sum.value();
    return out;
  }
  out.value = std::exp(log_moment_power(spec, gamma));
  return out;
}

double log_moment(const DistributionSpec& spec) {
  switch (spec.family()) {
    case Family::uniform_interval: {
      const double a = spec.ess_inf(), b = spec.ess_sup();
      return (b * std::log(b) - a * std::log(a)) / (b - a) - 1.0;
    }
    case Family::log_uniform:
      return 0.5 * (std::log(spec.ess_inf()) + std::log(spec.ess_sup()));
    default: {
      if (auto sign = exact_log_moment_sign(spec); sign && *sign == 0) return 0.0;
      KahanSum sum;
      for (const auto& a : spec.atoms()) sum.add(a.weight * std::log(a.value));
      return sum.value();
    }
  }
}

double log1p_moment(const DistributionSpec& spec) {
  switch (spec.family()) {
    case Family::uniform_interval: {
      const double a = spec.ess_inf(), b = spec.ess_sup();
      auto antiderivative = [](double z) { return (1.0 + z) * std::log1p(z) - z; };
      return (antiderivative(b) - antiderivative(a)) / (b - a);
    }
    case Family::log_uniform: {
      const double la = std::log(spec.ess_inf()), lb = std::log(spec.ess_sup());
      auto f = [](double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); };
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, la, lb, 15, 1e-14) / (lb - la);
    }
    default: {
      KahanSum sum;
      for (const auto& a : spec.atoms()) sum.add(a.weight * std::log1p(a.value));
      return sum.value();
    }
  }
}

AlphaResult solve_alpha(const DistributionSpec& spec, double tol) {
  if (!(tol > 0)) throw InvalidArgument("tolerance must be positive");
  if (spec.is_deterministic()) throw InvalidSpec("law is deterministic");
  AlphaResult out;
  const auto sign = exact_log_moment_sign(spec);
  const bool nonnegative_log = sign ? *sign >= 0 : log_moment(spec) >= 0;
  if (nonnegative_log) {
    out.kind = AlphaKind::zero_boundary;
    out.alpha = 0.0;
    return out;
  }
  if (spec.ess_sup() <= 1.0) {
    out.kind = AlphaKind::infinite;
    out.alpha = kInf;
    return out;
  }

  auto f = [&](double g) { return log_moment_power(spec, g); };
  double lo = 0.0, hi = 1.0;
  while (f(hi) <= 0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 512.0) throw NoUpcrossing("E[Z^gamma] < 1 for every probed gamma up to 512");
  }
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::abs(std::expm1(v)) <= tol) break;
    if (v > 0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  out.alpha = mid;
  out.residual = std::abs(std::expm1(f(mid)));

  const double k = std::round(mid);
  if (k >= 1 && std::abs(mid - k) < 1e-6) {
    if (auto m = exact_moment(spec, static_cast<unsigned>(k)); m && *m == 1) {
      out.alpha = k;
      out.residual = 0.0;
      out.exact_integer = true;
    }
  }
  return out;
}

std::vector<double> sample(const DistributionSpec& spec, std::uint64_t seed, std::size_t n) {
  if (n == 0) throw InvalidArgument("sample size must be at least 1");
  Rng rng(seed, 0);
  std::vector<double> out(n);
  for (auto& v : out) v = spec.draw(rng);
  return out;
}

AssumptionReport validate_assumptions(const DistributionSpec& spec) {
  AssumptionReport r;
  r.positive = spec.ess_inf() > 0;
  r.non_deterministic = !spec.is_deterministic();
  r.log_moment = log_moment(spec);
  const auto sign = exact_log_moment_sign(spec);
  r.negative_log_moment = sign ? *sign < 0 : r.log_moment < 0;
  r.bounded_support = std::isfinite(spec.ess_sup());
  r.delta_moment_finite = r.bounded_support;
  r.sup_norm = spec.ess_sup();
  return r;
}

}  // namespace lyapexp
