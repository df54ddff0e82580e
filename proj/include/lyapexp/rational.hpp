#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <string>
#include <string_view>

namespace lyapexp {

/// Exact rational with arbitrary-precision numerator and denominator.
/// Always stored in lowest terms.
using Rational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                               boost::multiprecision::et_off>;
using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                             boost::multiprecision::et_off>;

/// Parses "p/q", an integer, or a plain decimal ("0.125", "-3.5e-2") exactly.
/// Throws InvalidSpec on malformed input or a zero denominator.
Rational parse_rational(std::string_view text);

/// "p/q", or "p" when the denominator is 1.
std::string to_string(const Rational& value);

double to_double(const Rational& value);

/// value^k for integer k >= 0 by repeated squaring.
Rational pow(const Rational& value, unsigned k);

}  // namespace lyapexp
