#include "lyapexp/io.hpp"

#include "lyapexp/analysis.hpp"
#include "lyapexp/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lyapexp::io {
namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidSpec(std::string("missing field '") + key + "'");
  return j.at(key);
}

/// "2^-5" or "2^3"; nullopt for anything else.
std::optional<double> parse_power_of_two(std::string_view s) {
  if (s.size() < 3 || s.substr(0, 2) != "2^") return std::nullopt;
  int e = 0;
  const auto rest = s.substr(2);
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), e);
  if (ec != std::errc() || ptr != rest.data() + rest.size()) throw InvalidArgument("bad power of two '" + std::string(s) + "'");
  return std::ldexp(1.0, e);
}

double parse_value(std::string_view text) {
  const std::string s = trim(text);
  if (auto p = parse_power_of_two(s)) return *p;
  try {
    return to_double(parse_rational(s));
  } catch (const InvalidSpec&) {
    throw InvalidArgument("cannot parse number '" + s + "'");
  }
}

std::vector<std::pair<Rational, Rational>> parse_atoms(const json& atoms) {
  if (!atoms.is_array() || atoms.empty()) throw InvalidSpec("'atoms' must be a nonempty array");
  std::vector<std::pair<Rational, Rational>> out;
  for (const auto& a : atoms) out.emplace_back(parse_number(field(a, "value")), parse_number(field(a, "weight")));
  return out;
}

}  // namespace

Rational parse_number(const json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (j.is_number()) return parse_rational(j.dump());
  throw InvalidSpec("expected a number, got " + j.dump());
}

DistributionSpec parse_distribution(const json& j) {
  const std::string family = field(j, "family").get<std::string>();
  if (family == "two_point" || family == "finite_discrete" || family == "finite") {
    if (family == "two_point" && !j.contains("atoms"))
      return DistributionSpec::two_point(parse_number(field(j, "low")), parse_number(field(j, "high")),
                                         parse_number(field(j, "p_high")));
    const auto atoms = parse_atoms(field(j, "atoms"));
    if (family == "two_point" && atoms.size() != 2) throw InvalidSpec("two_point needs exactly two atoms");
    return DistributionSpec::finite(atoms);
  }
  if (family == "point_mass") return DistributionSpec::point_mass(to_double(parse_number(field(j, "value"))));
  if (family == "uniform_interval")
    return DistributionSpec::uniform_interval(to_double(parse_number(field(j, "a"))), to_double(parse_number(field(j, "b"))));
  if (family == "log_uniform")
    return DistributionSpec::log_uniform(to_double(parse_number(field(j, "a"))), to_double(parse_number(field(j, "b"))));
  throw InvalidSpec("unknown family '" + family + "'");
}

json to_json(const DistributionSpec& spec) {
  json j;
  if (spec.is_deterministic()) {
    j["family"] = "point_mass";
    j["value"] = format_double(spec.ess_sup());
    return j;
  }
  j["family"] = to_string(spec.family());
  if (spec.is_finite()) {
    j["atoms"] = json::array();
    for (const auto& a : spec.atoms()) {
      if (a.exact_value)
        j["atoms"].push_back({{"value", to_string(*a.exact_value)}, {"weight", to_string(*a.exact_weight)}});
      else
        j["atoms"].push_back({{"value", format_double(a.value)}, {"weight", format_double(a.weight)}});
    }
  } else {
    j["a"] = format_double(spec.ess_inf());
    j["b"] = format_double(spec.ess_sup());
  }
  return j;
}

FiniteBlockLaw<Rational> parse_block_law(const json& j) {
  FiniteBlockLaw<Rational> law;
  law.d = field(j, "d").get<int>();
  if (law.d < 1 || law.d > 4) throw InvalidSpec("block dimension must be between 1 and 4");
  const auto& atoms = field(j, "atoms");
  if (!atoms.is_array() || atoms.empty()) throw InvalidSpec("'atoms' must be a nonempty array");
  for (const auto& a : atoms) {
    BlockAtom<Rational> atom{parse_number(field(a, "weight")), Vector<Rational>(law.d), Vector<Rational>(law.d),
                             Matrix<Rational>(law.d, law.d)};
    const auto& l = field(a, "L");
    const auto& c = field(a, "C");
    const auto& n = field(a, "N");
    if (!l.is_array() || !c.is_array() || !n.is_array() || l.size() != static_cast<std::size_t>(law.d) ||
        c.size() != static_cast<std::size_t>(law.d) || n.size() != static_cast<std::size_t>(law.d))
      throw InvalidSpec("L, C and N must have d entries / rows");
    for (int i = 0; i < law.d; ++i) {
      atom.L(i) = parse_number(l[static_cast<std::size_t>(i)]);
      atom.C(i) = parse_number(c[static_cast<std::size_t>(i)]);
      const auto& row = n[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(law.d)) throw InvalidSpec("N must be d x d");
      for (int k = 0; k < law.d; ++k) atom.N(i, k) = parse_number(row[static_cast<std::size_t>(k)]);
    }
    law.atoms.push_back(std::move(atom));
  }
  return law;
}

json to_json(const FiniteBlockLaw<Rational>& law) {
  json j;
  j["d"] = law.d;
  j["atoms"] = json::array();
  for (const auto& a : law.atoms) {
    json atom;
    atom["weight"] = to_string(a.weight);
    atom["L"] = json::array();
    atom["C"] = json::array();
    atom["N"] = json::array();
    for (int i = 0; i < law.d; ++i) {
      atom["L"].push_back(to_string(a.L(i)));
      atom["C"].push_back(to_string(a.C(i)));
      json row = json::array();
      for (int k = 0; k < law.d; ++k) row.push_back(to_string(a.N(i, k)));
      atom["N"].push_back(row);
    }
    j["atoms"].push_back(atom);
  }
  return j;
}

FieldLaw parse_field_law(const json& j) {
  const std::string family = field(j, "family").get<std::string>();
  if (family == "constant") return FieldLaw::constant(to_double(parse_number(field(j, "value"))));
  if (family == "uniform") return FieldLaw::uniform(to_double(parse_number(field(j, "a"))), to_double(parse_number(field(j, "b"))));
  if (family == "finite" || family == "finite_discrete" || family == "two_point") {
    std::vector<std::pair<double, double>> atoms;
    Rational total(0);
    for (const auto& [h, w] : parse_atoms(field(j, "atoms"))) {
      atoms.emplace_back(to_double(h), to_double(w));
      total += w;
    }
    if (total != 1) throw InvalidSpec("field weights sum to " + to_string(total) + ", not 1");
    return FieldLaw::finite(atoms);
  }
  throw InvalidSpec("unknown field family '" + family + "'");
}

json to_json(const FieldLaw& law) {
  json j;
  if (law.kind == FieldLaw::Kind::uniform) {
    j["family"] = "uniform";
    j["a"] = format_double(law.a);
    j["b"] = format_double(law.b);
    return j;
  }
  j["family"] = "finite";
  j["atoms"] = json::array();
  for (const auto& [h, w] : law.atoms) j["atoms"].push_back({{"value", format_double(h)}, {"weight", format_double(w)}});
  return j;
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InvalidSpec(path.string() + ": " + e.what());
  }
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (trim(item).empty()) throw InvalidArgument("empty item in list '" + std::string(text) + "'");
    out.push_back(parse_value(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_grid(std::string_view text) {
  const std::string s = trim(text);
  if (auto dots = s.find(".."); dots != std::string::npos && s.rfind("2^", 0) == 0) {
    const std::string lo = trim(std::string_view(s).substr(0, dots));
    const std::string hi = trim(std::string_view(s).substr(dots + 2));
    auto exponent = [&](const std::string& part) {
      if (part.rfind("2^", 0) != 0) throw InvalidArgument("grid bounds must look like 2^-k");
      int e = 0;
      auto [ptr, ec] = std::from_chars(part.data() + 2, part.data() + part.size(), e);
      if (ec != std::errc() || ptr != part.data() + part.size()) throw InvalidArgument("bad grid bound '" + part + "'");
      return -e;
    };
    const int a = exponent(lo), b = exponent(hi);
    if (a > b) throw InvalidArgument("grid '" + s + "' must run from the largest eps down");
    return dyadic_grid(a, b);
  }
  return parse_list(s);
}

std::size_t parse_count(std::string_view text) {
  const std::string s = trim(text);
  const double v = parse_value(s);
  if (!(v >= 0) || v > 1e15 || v != std::floor(v)) throw InvalidArgument("'" + s + "' is not a valid count");
  return static_cast<std::size_t>(v);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace lyapexp::io
