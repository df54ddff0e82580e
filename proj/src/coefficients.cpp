#include "lyapexp/coefficients.hpp"

#include <cmath>

namespace lyapexp {

MomentVector<Rational> exact_moment_vector(const DistributionSpec& spec, int order) {
  if (!spec.is_exact()) throw InvalidSpec("law " + spec.describe() + " has no exact moments");
  std::vector<Rational> m;
  for (int j = 1; j <= order; ++j) m.push_back(*exact_moment(spec, static_cast<unsigned>(j)));
  return MomentVector<Rational>(m);
}

MomentVector<long double> float_moment_vector(const DistributionSpec& spec, int order) {
  std::vector<long double> m;
  const long double a = spec.ess_inf(), b = spec.ess_sup();
  for (int j = 1; j <= order; ++j) {
    long double v = 0;
    switch (spec.family()) {
      case Family::uniform_interval:
        v = (std::pow(b, j + 1) - std::pow(a, j + 1)) / ((j + 1) * (b - a));
        break;
      case Family::log_uniform:
        v = (std::pow(b, j) - std::pow(a, j)) / (j * (std::log(b) - std::log(a)));
        break;
      default:
        for (const auto& atom : spec.atoms()) {
          const long double value = atom.exact_value ? atom.exact_value->convert_to<long double>() : atom.value;
          const long double weight = atom.exact_weight ? atom.exact_weight->convert_to<long double>() : atom.weight;
          v += weight * std::pow(value, j);
        }
    }
    m.push_back(v);
  }
  return MomentVector<long double>(m);
}

AnyCoefficientTable coefficients_for(const DistributionSpec& spec, int order, bool require_exact, bool force_float) {
  AnyCoefficientTable out;
  if (spec.is_exact() && !force_float) {
    out.exact = ell_coefficients(exact_moment_vector(spec, order), order);
  } else {
    if (require_exact) throw InvalidSpec("exact coefficients need a finite law with rational data");
    out.approx = ell_coefficients(float_moment_vector(spec, order), order);
  }
  return out;
}

}  // namespace lyapexp
