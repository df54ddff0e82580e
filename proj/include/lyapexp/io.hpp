#pragma once

#include "lyapexp/distributions.hpp"
#include "lyapexp/highdim.hpp"
#include "lyapexp/ising.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lyapexp::io {

using json = nlohmann::ordered_json;

/// Law of Z from JSON:
///   {"family":"two_point","atoms":[{"value":"1/2","weight":"4/5"},{"value":"2","weight":"1/5"}]}
///   {"family":"two_point","low":"1/2","high":"2","p_high":"1/5"}
///   {"family":"finite_discrete","atoms":[...]}
///   {"family":"uniform_interval","a":0.1,"b":0.9}   (also "log_uniform")
///   {"family":"point_mass","value":0.5}   (deterministic Z, for oracle runs with --no-check)
/// Numbers may be JSON numbers, decimal strings or "p/q" strings.
DistributionSpec parse_distribution(const json& j);
json to_json(const DistributionSpec& spec);

/// {"d":2,"atoms":[{"weight":"1/2","L":["1","0"],"C":["1/3","1/4"],"N":[["1/2","0"],["0","1/3"]]}]}
FiniteBlockLaw<Rational> parse_block_law(const json& j);
json to_json(const FiniteBlockLaw<Rational>& law);

/// {"family":"finite","atoms":[{"value":0.5,"weight":"1/2"},...]}, {"family":"constant","value":1},
/// or {"family":"uniform","a":0,"b":1}. Values are fields h, not Z.
FieldLaw parse_field_law(const json& j);
json to_json(const FieldLaw& law);

Rational parse_number(const json& j);
json read_json(const std::filesystem::path& path);

/// "2^-2..2^-10" (dyadic, decreasing), a comma list of numbers ("0.1,1/8,2^-5"), or one value.
std::vector<double> parse_grid(std::string_view text);
std::vector<double> parse_list(std::string_view text);
/// Counts such as "1e7" or "250000".
std::size_t parse_count(std::string_view text);

/// 17 significant digits, shortest round-trip form not attempted.
std::string format_double(double v);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a64(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace lyapexp::io
