#include "lyapexp/cli.hpp"

#include "lyapexp/analysis.hpp"
#include "lyapexp/coefficients.hpp"
#include "lyapexp/errors.hpp"
#include "lyapexp/highdim.hpp"
#include "lyapexp/io.hpp"
#include "lyapexp/ising.hpp"
#include "lyapexp/lyapunov.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

namespace lyapexp::cli {

using io::format_double;
using json = nlohmann::ordered_json;

namespace {

struct RunOptions {
  std::uint64_t seed = 7;
  std::string steps;
  std::string burn_in = "1e4";
  std::size_t replicas = 8;
  std::size_t batches = 64;
  std::size_t thinning = 1;
  std::size_t threads = 0;
  bool no_check = false;
  std::string out_dir;
  bool json_output = false;
};

struct Outcome {
  std::vector<OutputFile> files;
  std::string text;     // printed to stdout
  json config;
};

void add_run_options(CLI::App* app, RunOptions& o, const std::string& default_steps) {
  o.steps = default_steps;
  app->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  app->add_option("--steps", o.steps, "Recorded steps summed over replicas (e.g. 1e6)")->capture_default_str();
  app->add_option("--burn-in", o.burn_in, "Burn-in steps per replica")->capture_default_str();
  app->add_option("--replicas", o.replicas, "Independent replicas (streams)")->capture_default_str();
  app->add_option("--batches", o.batches, "Batch-means batches over all replicas")->capture_default_str();
  app->add_option("--thinning", o.thinning, "Steps between recorded samples")->capture_default_str();
  app->add_flag("--no-check", o.no_check, "Skip the assumption checks (deterministic oracle laws)");
}

ChainConfig make_config(const RunOptions& o) {
  ChainConfig cfg;
  cfg.steps = io::parse_count(o.steps);
  cfg.burn_in = io::parse_count(o.burn_in);
  cfg.batches = o.batches;
  cfg.thinning = o.thinning;
  cfg.run.seed = o.seed;
  cfg.run.replicas = o.replicas;
  cfg.run.threads = o.threads;
  cfg.check_assumptions = !o.no_check;
  return cfg;
}

json config_json(const ChainConfig& cfg) {
  return {{"seed", cfg.run.seed},         {"steps", cfg.steps},   {"burn_in", cfg.burn_in},
          {"replicas", cfg.run.replicas}, {"batches", cfg.batches}, {"thinning", cfg.thinning},
          {"check_assumptions", cfg.check_assumptions}};
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json grid_json(std::span<const double> grid) {
  json j = json::array();
  for (double e : grid) j.push_back(e);
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

DistributionSpec load_spec(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--spec is required");
  return io::parse_distribution(io::read_json(path));
}

// ---------------------------------------------------------------- coeffs

Outcome run_coeffs(const std::string& spec_path, const std::string& moments_text, int order, bool exact) {
  if (order < 0) throw InvalidArgument("--order must be nonnegative");
  AnyCoefficientTable table;
  json config;
  if (!moments_text.empty()) {
    std::vector<Rational> m;
    std::string item;
    std::stringstream ss(moments_text);
    while (std::getline(ss, item, ',')) m.push_back(parse_rational(item));
    if (static_cast<int>(m.size()) < order)
      throw InvalidArgument("--moments gives " + std::to_string(m.size()) + " moments, order " + std::to_string(order) + " needs more");
    for (const auto& v : m)
      if (v <= 0) throw InvalidArgument("moments must be positive");
    table.exact = ell_coefficients(MomentVector<Rational>(m), order);
    config["moments"] = moments_text;
  } else {
    const auto spec = load_spec(spec_path);
    table = coefficients_for(spec, order, exact);
    config["spec"] = io::to_json(spec);
  }
  config["order"] = order;
  config["exact"] = exact;

  json j;
  j["order"] = order;
  j["exact"] = table.exact.has_value();
  j["condition"] = table.exact ? table.exact->condition : table.approx->condition;
  j["moments"] = json::array();
  j["g"] = json::array();
  j["ell"] = json::array();
  std::ostringstream g_csv, ell_csv;
  g_csv << "l,k,g,value\n";
  ell_csv << "s,ell,value\n";
  auto exact_or_empty = [&](auto&& get) -> std::string { return table.exact ? to_string(get(*table.exact)) : ""; };
  for (int l = 1; l <= order; ++l) {
    const double m = table.exact ? to_double(table.exact->moments[l]) : to_double(table.approx->moments[l]);
    json mj = {{"j", l}, {"value", m}};
    if (table.exact) mj["exact"] = to_string(table.exact->moments[l]);
    j["moments"].push_back(mj);
  }
  for (int s = 0; s <= order; ++s) {
    for (int l = 1; l + s <= order; ++l) {
      const double v = table.exact ? to_double(table.exact->g(l, s)) : to_double(table.approx->g(l, s));
      const std::string e = exact_or_empty([&](const auto& t) { return t.g(l, s); });
      json gj = {{"l", l}, {"k", s}, {"value", v}};
      if (table.exact) gj["exact"] = e;
      j["g"].push_back(gj);
      g_csv << l << ',' << s << ',' << e << ',' << format_double(v) << '\n';
    }
  }
  for (int s = 1; s <= order; ++s) {
    const double v = table.ell(s);
    const std::string e = exact_or_empty([&](const auto& t) { return t.ell(s); });
    json ej = {{"s", s}, {"value", v}};
    if (table.exact) ej["exact"] = e;
    j["ell"].push_back(ej);
    ell_csv << s << ',' << e << ',' << format_double(v) << '\n';
  }
  Outcome o;
  o.config = config;
  o.files = {{"coeffs.json", dump(j)}, {"g.csv", g_csv.str()}, {"ell.csv", ell_csv.str()}};
  o.text = "# g(l,k)\n" + g_csv.str() + "# ell(s)\n" + ell_csv.str();
  return o;
}

// ---------------------------------------------------------------- alpha

json alpha_json(const DistributionSpec& spec, double tol) {
  const auto a = solve_alpha(spec, tol);
  const auto report = validate_assumptions(spec);
  json j;
  j["spec"] = io::to_json(spec);
  j["kind"] = a.kind == AlphaKind::finite ? "finite" : a.kind == AlphaKind::infinite ? "infinite" : "zero_boundary";
  j["alpha"] = number_or_null(a.alpha);
  j["residual"] = a.residual;
  j["exact_integer"] = a.exact_integer;
  j["integer_alpha"] = is_integer_alpha(a);
  j["closed_at_alpha"] = a.closed_at_alpha;
  j["log_moment"] = report.log_moment;
  j["sup_norm"] = number_or_null(report.sup_norm);
  j["assumptions"] = {{"positive", report.positive},
                      {"non_deterministic", report.non_deterministic},
                      {"negative_log_moment", report.negative_log_moment},
                      {"delta_moment_finite", report.delta_moment_finite},
                      {"bounded_support", report.bounded_support},
                      {"all_pass", report.all_pass()}};
  if (a.kind == AlphaKind::finite) {
    const auto b = theory_brackets(spec, static_cast<int>(std::ceil(a.alpha)) - 1);
    j["theta"] = b.theta;
    j["eta"] = b.eta;
  }
  return j;
}

// ---------------------------------------------------------------- chain

Outcome run_chain(const DistributionSpec& spec, const std::vector<double>& grid, const std::vector<double>& gammas,
                  std::optional<double> truncation, const ChainConfig& cfg) {
  const auto stats = simulate_chain_grid(spec, grid, cfg, gammas, truncation);
  std::ostringstream csv;
  csv << "eps,gamma,moment,trunc_moment,stderr,max_x,trunc_stderr\n";
  json rows = json::array();
  for (const auto& s : stats) {
    for (const auto& m : s.moments) {
      csv << format_double(s.eps) << ',' << format_double(m.gamma) << ',' << format_double(m.moment) << ','
          << format_double(m.truncated) << ',' << format_double(m.moment_se) << ',' << format_double(s.max_x) << ','
          << format_double(m.truncated_se) << '\n';
      rows.push_back({{"eps", s.eps}, {"gamma", m.gamma}, {"moment", m.moment}, {"trunc_moment", m.truncated},
                      {"stderr", m.moment_se}, {"max_x", s.max_x}, {"trunc_stderr", m.truncated_se},
                      {"log_term", s.log_term}, {"log_term_stderr", s.log_term_se},
                      {"non_convergence", s.non_convergence}});
    }
  }
  Outcome o;
  o.config = config_json(cfg);
  o.config["spec"] = io::to_json(spec);
  o.config["eps"] = grid_json(grid);
  o.config["gammas"] = grid_json(gammas);
  o.config["B"] = truncation.value_or(default_truncation(spec));
  o.files = {{"chain.csv", csv.str()}, {"chain.json", dump(rows)}};
  o.text = csv.str();
  return o;
}

// ---------------------------------------------------------------- lyap

json estimate_json(const LyapunovEstimate& e) {
  return {{"eps", e.eps}, {"method", to_string(e.method)}, {"value", e.value},
          {"stderr", e.std_error}, {"n", e.n}, {"seed", e.seed}};
}

std::string estimate_csv(const std::vector<LyapunovEstimate>& estimates) {
  std::ostringstream csv;
  csv << "eps,method,value,stderr,n,seed\n";
  for (const auto& e : estimates)
    csv << format_double(e.eps) << ',' << to_string(e.method) << ',' << format_double(e.value) << ','
        << format_double(e.std_error) << ',' << e.n << ',' << e.seed << '\n';
  return csv.str();
}

Outcome run_lyap(const DistributionSpec& spec, const std::vector<double>& grid, const std::string& method,
                 const ChainConfig& cfg) {
  if (method != "direct" && method != "invariant" && method != "both")
    throw InvalidArgument("--method must be direct, invariant or both");
  std::vector<LyapunovEstimate> estimates;
  std::vector<LyapunovEstimate> invariant;
  if (method != "direct") invariant = lyapunov_invariant_grid(spec, grid, cfg);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (method != "invariant") estimates.push_back(lyapunov_direct(spec, grid[i], cfg));
    if (method != "direct") estimates.push_back(invariant[i]);
  }
  json rows = json::array();
  for (const auto& e : estimates) rows.push_back(estimate_json(e));
  Outcome o;
  o.config = config_json(cfg);
  o.config["spec"] = io::to_json(spec);
  o.config["eps"] = grid_json(grid);
  o.config["method"] = method;
  const std::string csv = estimate_csv(estimates);
  o.files = {{"lyap.csv", csv}, {"lyap.json", dump(rows)}};
  o.text = csv;
  return o;
}

// ---------------------------------------------------------------- fit

json model_json(const ModelFit& m) {
  return {{"exponent", m.exponent}, {"exponent_se", m.exponent_se}, {"log_constant", m.log_constant},
          {"r_squared", m.r_squared}, {"rss_per_dof", m.rss_per_dof}};
}

json bracket_json(const TheoryBracket& b) {
  return {{"singular", b.singular},         {"alpha", number_or_null(b.alpha)},
          {"integer_alpha", b.integer_alpha}, {"lower_exp", b.lower_exp},
          {"upper_exp", b.upper_exp},       {"log_correction", b.log_correction},
          {"regular_next_term", b.regular_next_term}, {"theta", b.theta},
          {"eta", b.eta}};
}

Outcome run_fit(const DistributionSpec& spec, int order, const std::vector<double>& grid, bool control_variates,
                const std::string& plot_name, const ChainConfig& cfg) {
  const auto series = residual_series(spec, order, grid, cfg, control_variates);
  std::ostringstream csv;
  csv << "eps,lambda,lambda_se,regular,residual,residual_se\n";
  for (const auto& p : series.points)
    csv << format_double(p.eps) << ',' << format_double(p.lambda) << ',' << format_double(p.lambda_se) << ','
        << format_double(p.regular) << ',' << format_double(p.residual) << ',' << format_double(p.residual_se) << '\n';

  const auto alpha = solve_alpha(spec, 1e-10);
  FitOptions options;
  std::optional<TheoryBracket> bracket;
  if (alpha.kind == AlphaKind::finite || alpha.kind == AlphaKind::infinite) bracket = theory_brackets(spec, order);
  if (bracket && bracket->log_correction) {
    options.log_model = true;
    options.fixed_exponent = 2.0 * bracket->alpha;
  }
  auto fit = fit_exponent(series, options);
  fit.bracket = bracket;

  json j;
  j["K"] = order;
  j["sign"] = series.sign;
  j["control_variates"] = series.control_variates;
  j["exponent"] = fit.exponent();
  j["exponent_se"] = fit.exponent_se();
  j["with_log_model"] = fit.with_log_model;
  j["power"] = model_json(fit.power);
  j["log_model"] = fit.log_model ? model_json(*fit.log_model) : json(nullptr);
  j["fixed_log_constant"] = fit.fixed_log_constant ? json(*fit.fixed_log_constant) : json(nullptr);
  j["local_slopes"] = grid_json(fit.local_slopes);
  j["points_used"] = fit.points_used;
  j["points_total"] = fit.points_total;
  j["bracket"] = bracket ? bracket_json(*bracket) : json(nullptr);
  if (bracket && bracket->singular) {
    const double e = fit.exponent();
    j["inside_bracket"] = e >= bracket->lower_exp - 0.15 && e <= bracket->upper_exp + 0.15;
  }

  Outcome o;
  o.config = config_json(cfg);
  o.config["spec"] = io::to_json(spec);
  o.config["K"] = order;
  o.config["eps"] = grid_json(grid);
  o.config["control_variates"] = control_variates;
  o.files = {{"fit.json", dump(j)}, {"residuals.csv", csv.str()}};
  if (!plot_name.empty()) {
    std::ostringstream plot;
    plot << "eps,residual\n";
    for (const auto& p : series.points) plot << format_double(p.eps) << ',' << format_double(p.residual) << '\n';
    o.files.push_back({std::filesystem::path(plot_name).filename().string(), plot.str()});
  }
  o.text = dump(j);
  return o;
}

// ---------------------------------------------------------------- highdim

Outcome run_highdim(const std::string& blocks_path, int order, const std::vector<double>& grid, bool single,
                    const std::string& method, const ChainConfig& cfg) {
  if (blocks_path.empty()) throw InvalidArgument("--blocks is required");
  const auto law = io::parse_block_law(io::read_json(blocks_path));
  const auto spec = BlockSpec::from_law(law);
  json j;
  j["d"] = law.d;
  j["g_matrices"] = json::array();
  for (int l = 1; l <= std::max(order, 1); ++l) {
    const auto g = g_matrix(spec, l, false);
    json gj;
    gj["l"] = l;
    gj["indices"] = g.indices;
    gj["condition"] = number_or_null(g.condition);
    gj["entries"] = json::array();
    for (Eigen::Index r = 0; r < g.G.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < g.G.cols(); ++c) row.push_back(g.exact ? json(to_string((*g.exact)(r, c))) : json(g.G(r, c)));
      gj["entries"].push_back(row);
    }
    j["g_matrices"].push_back(gj);
  }
  j["q2_prediction"] = second_order_coefficient(spec);

  std::vector<LyapunovEstimate> estimates;
  if (single) {
    if (method != "direct" && method != "invariant" && method != "both")
      throw InvalidArgument("--method must be direct, invariant or both");
    for (double eps : grid) {
      if (method != "invariant") estimates.push_back(lyapunov_general(spec, eps, cfg, Method::direct_product));
      if (method != "direct") estimates.push_back(lyapunov_general(spec, eps, cfg, Method::invariant_formula));
    }
  } else {
    const auto fit = extract_expansion(spec, order, grid, cfg);
    j["expansion"] = {{"powers", fit.powers},
                      {"coefficients", fit.coefficients},
                      {"std_errors", fit.std_errors},
                      {"nuisance_powers", fit.nuisance_powers}};
    estimates = fit.estimates;
  }
  j["estimates"] = json::array();
  for (const auto& e : estimates) j["estimates"].push_back(estimate_json(e));

  Outcome o;
  o.config = config_json(cfg);
  o.config["blocks"] = io::to_json(law);
  o.config["K"] = order;
  o.config["eps"] = grid_json(grid);
  o.config["method"] = single ? method : "expansion";
  o.files = {{"highdim.json", dump(j)}, {"highdim.csv", estimate_csv(estimates)}};
  o.text = dump(j);
  return o;
}

// ---------------------------------------------------------------- ising

Outcome run_ising(const IsingModel& model, const std::vector<double>& scan, int order, const ChainConfig& cfg) {
  const auto est = free_energy(model, cfg);
  json j;
  j["range"] = model.range;
  j["couplings"] = model.couplings;
  j["temperature"] = model.temperature;
  j["eps_l"] = model.eps();
  j["field_law"] = io::to_json(model.field);
  j["z_law"] = model.z_law().describe();
  j["f"] = est.value;
  j["stderr"] = est.std_error;
  j["n"] = est.n;
  j["seed"] = est.seed;
  if (!scan.empty()) {
    const auto ray = default_ray(model);
    const auto report = strong_coupling_scan(model, ray, scan, order, cfg);
    j["strong_coupling"] = {{"ray_scale", ray.scale},
                            {"t_grid", scan},
                            {"powers", report.fit.powers},
                            {"coefficients", report.fit.coefficients},
                            {"std_errors", report.fit.std_errors},
                            {"predicted_q2", report.predicted_q2}};
  }
  Outcome o;
  o.config = config_json(cfg);
  o.config["range"] = model.range;
  o.config["couplings"] = model.couplings;
  o.config["temperature"] = model.temperature;
  o.config["field_law"] = io::to_json(model.field);
  o.config["scan"] = scan;
  o.config["K"] = order;
  o.files = {{"ising.json", dump(j)}};
  o.text = dump(j);
  return o;
}

// ---------------------------------------------------------------- selftest

Outcome run_selftest() {
  std::vector<std::pair<std::string, std::function<bool()>>> checks;
  const auto two = DistributionSpec::two_point(Rational(1, 2), Rational(2), Rational(1, 5));
  checks.emplace_back("zeroth moment is 1", [&] { return moment(two, 0).value == 1.0; });
  checks.emplace_back("symmetric law has E[log Z] = 0", [] {
    return log_moment(DistributionSpec::two_point(Rational(1, 2), Rational(2), Rational(1, 2))) == 0.0;
  });
  checks.emplace_back("single atom is rejected", [] {
    try {
      DistributionSpec::finite(std::vector<std::pair<Rational, Rational>>{{Rational(1, 2), Rational(1)}});
    } catch (const InvalidSpec&) {
      return true;
    }
    return false;
  });
  checks.emplace_back("Z <= 1 gives alpha = inf", [] {
    return solve_alpha(DistributionSpec::uniform_interval(0.1, 0.9)).kind == AlphaKind::infinite;
  });
  checks.emplace_back("sampling is deterministic", [&] { return sample(two, 11, 1000) == sample(two, 11, 1000); });
  checks.emplace_back("samples stay in the support", [&] {
    const auto s = sample(two, 3, 1000);
    return std::all_of(s.begin(), s.end(), [](double v) { return v == 0.5 || v == 2.0; });
  });
  checks.emplace_back("g(0, .) row is (1, 0, ...)", [] {
    const auto t = g_table(MomentVector<Rational>({Rational(1, 2), Rational(1, 3), Rational(1, 4)}), 3);
    return t.g(0, 0) == 1 && t.g(0, 1) == 0 && t.g(0, 2) == 0 && t.g(0, 3) == 0;
  });
  checks.emplace_back("K = 0 has no ell coefficients", [] {
    return ell_coefficients(MomentVector<Rational>(), 0).ell.size() == 1;
  });
  checks.emplace_back("regular part vanishes at eps = 0", [] {
    return regular_part(ell_coefficients(MomentVector<Rational>({Rational(3, 4), Rational(3, 4)}), 2), 0.0) == 0.0;
  });
  checks.emplace_back("step at eps = 1 returns z", [] { return step(5.0, 0.75, 1.0) == 0.75; });
  checks.emplace_back("step from 0 returns z", [] { return step(0.0, 0.75, 0.3) == 0.75; });
  checks.emplace_back("step at eps = 0 is z(1+x)", [] { return step(3.0, 0.5, 0.0) == 2.0; });
  checks.emplace_back("X0 of Z = 1/2 is 1", [] {
    Rng rng(1, 0);
    return std::abs(sample_x0(DistributionSpec::point_mass(0.5), rng) - 1.0) < 1e-14;
  });
  checks.emplace_back("coupled paths with eps' = eps coincide", [&] {
    const auto p = coupled_paths(two, 0.2, 0.2, 1000, 5);
    return p.low == p.high;
  });
  checks.emplace_back("Z = 1, eps = 0.2 gives log 1.2", [] {
    ChainConfig cfg;
    cfg.steps = 4096;
    cfg.burn_in = 100;
    cfg.check_assumptions = false;
    const auto e = lyapunov_direct(DistributionSpec::point_mass(1.0), 0.2, cfg);
    return std::abs(e.value - std::log(1.2)) < 1e-12;
  });
  checks.emplace_back("multi-indices for d = 1 and l = 0", [] {
    return multi_indices(1, 5) == std::vector<MultiIndex>{{5}} && multi_indices(3, 0) == std::vector<MultiIndex>{{0, 0, 0}};
  });
  checks.emplace_back("K = 0 expansion is empty", [&] {
    return extract_expansion(BlockSpec::scalar(two), 0, dyadic_grid(1, 4), ChainConfig{}).coefficients.empty();
  });
  checks.emplace_back("infinite temperature transfer matrix", [] {
    const auto a = transfer_matrix(2, {1.0, 1.0}, 1.0);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if ((a.row(i).array() != 0).count() != 2 || a.row(i).maxCoeff() != 1.0) return false;
    return true;
  });

  std::ostringstream text;
  std::size_t failed = 0;
  json j = json::array();
  for (const auto& [name, check] : checks) {
    bool pass = false;
    try {
      pass = check();
    } catch (const std::exception&) {
      pass = false;
    }
    failed += pass ? 0 : 1;
    text << (pass ? "PASS " : "FAIL ") << name << '\n';
    j.push_back({{"check", name}, {"pass", pass}});
  }
  text << (failed == 0 ? "selftest: all checks passed\n" : "selftest: " + std::to_string(failed) + " checks failed\n");
  Outcome o;
  o.files = {{"selftest.json", dump(j)}};
  o.text = text.str();
  if (failed > 0) throw InsufficientSignal(std::to_string(failed) + " selftest checks failed");
  return o;
}

std::vector<std::string> canonical_argv(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--out" || a == "--threads") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--threads=", 0) == 0) continue;
    out.push_back(a);
  }
  return out;
}

}  // namespace

json make_manifest(const std::string& subcommand, const std::vector<std::string>& argv, const json& config,
                   std::size_t threads, double wall_seconds, const std::vector<OutputFile>& outputs) {
  json m;
  m["tool"] = "lyapexp";
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  m["argv"] = argv;
  m["config"] = config;
  m["seed"] = config.contains("seed") ? config["seed"] : json(nullptr);
  m["threads"] = threads;
  m["wall_time_seconds"] = wall_seconds;
  m["outputs"] = json::array();
  for (const auto& f : outputs)
    m["outputs"].push_back({{"file", f.name}, {"bytes", f.contents.size()}, {"fnv1a64", io::fnv1a64(f.contents)}});
  return m;
}

ReplayResult replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                    std::size_t threads) {
  const auto manifest = io::read_json(manifest_path);
  if (!manifest.contains("argv") || !manifest.contains("outputs")) throw InvalidSpec("not a run manifest");
  auto args = manifest["argv"].get<std::vector<std::string>>();
  args.push_back("--out");
  args.push_back(out_dir.string());
  args.push_back("--threads");
  args.push_back(std::to_string(threads));
  std::ostringstream sink, err;
  ReplayResult result;
  const int code = dispatch(args, sink, err);
  if (code != ok) {
    result.identical = false;
    result.exit_code = code;
    result.lines.push_back("rerun failed with exit code " + std::to_string(code) + ": " + err.str());
    return result;
  }
  for (const auto& entry : manifest["outputs"]) {
    const auto name = entry["file"].get<std::string>();
    const auto expected = entry["fnv1a64"].get<std::string>();
    std::string actual = "missing";
    if (std::filesystem::exists(out_dir / name)) actual = io::fnv1a64(io::read_file(out_dir / name));
    const bool same = actual == expected;
    result.identical = result.identical && same;
    result.lines.push_back(std::string(same ? "match " : "MISMATCH ") + name + " " + expected +
                           (same ? "" : " != " + actual));
  }
  result.exit_code = result.identical ? ok : numerical;
  return result;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lyapexp: small-eps expansion of a random 2x2 matrix product Lyapunov exponent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunOptions run;
  std::string subcommand;
  std::function<Outcome()> runner;
  bool skip_output = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", run.out_dir, "Directory for outputs and manifest.json");
    sub->add_option("--threads", run.threads, "Worker threads (default: LYAPEXP_THREADS or 1)");
    sub->add_flag("--json", run.json_output, "Print JSON instead of tables where both exist");
  };

  std::string spec_path, moments, eps_text, grid_text, method = "both", gammas_text = "1,2", blocks_path,
                                                       field_path, couplings_text, scan_text, plot_name, manifest_path;
  int order = 1;
  bool exact = false, no_cv = false;
  double tol = 1e-12, temperature = 1.0;
  std::optional<double> truncation;
  int range = 1;

  auto* coeffs = app.add_subcommand("coeffs", "Exact g(l,k) and ell(s) tables");
  coeffs->add_option("--spec", spec_path, "Law of Z (JSON)");
  coeffs->add_option("--moments", moments, "Moments E[Z],...,E[Z^n] as a comma list of rationals");
  coeffs->add_option("--order,--K", order, "Order K")->capture_default_str();
  coeffs->add_flag("--exact", exact, "Require exact rational arithmetic");
  common(coeffs);
  coeffs->callback([&] { runner = [&] { return run_coeffs(spec_path, moments, order, exact); }; });

  auto* alpha = app.add_subcommand("alpha", "Critical exponent alpha and assumption report");
  alpha->add_option("--spec", spec_path, "Law of Z (JSON)")->required();
  alpha->add_option("--tol", tol, "Bisection tolerance on |E[Z^alpha] - 1|")->capture_default_str();
  common(alpha);
  alpha->callback([&] {
    runner = [&] {
      const auto spec = load_spec(spec_path);
      Outcome o;
      o.config = {{"spec", io::to_json(spec)}, {"tol", tol}};
      o.text = dump(alpha_json(spec, tol));
      o.files = {{"alpha.json", o.text}};
      return o;
    };
  });

  auto eps_options = [&](CLI::App* sub, const std::string& default_grid) {
    grid_text = default_grid;
    sub->add_option("--eps", eps_text, "Single eps or comma list");
    sub->add_option("--eps-grid", grid_text, "Grid, e.g. 2^-2..2^-10")->capture_default_str();
  };
  auto resolve_grid = [&] { return io::parse_grid(eps_text.empty() ? grid_text : eps_text); };

  auto* chain = app.add_subcommand("chain", "Moments of the invariant chain");
  chain->add_option("--spec", spec_path, "Law of Z (JSON)")->required();
  eps_options(chain, "0.1");
  chain->add_option("--gammas", gammas_text, "Moment orders")->capture_default_str();
  chain->add_option("--B", truncation, "Truncation level for E[X^gamma 1{eps^2 X <= B}]");
  add_run_options(chain, run, "1e6");
  common(chain);
  chain->callback([&] {
    runner = [&] {
      return run_chain(load_spec(spec_path), resolve_grid(), io::parse_list(gammas_text), truncation, make_config(run));
    };
  });

  auto* lyap = app.add_subcommand("lyap", "Lyapunov exponent by direct product and invariant formula");
  lyap->add_option("--spec", spec_path, "Law of Z (JSON)")->required();
  eps_options(lyap, "0.1");
  lyap->add_option("--method", method, "direct, invariant or both")->capture_default_str();
  add_run_options(lyap, run, "1e6");
  common(lyap);
  lyap->callback([&] { runner = [&] { return run_lyap(load_spec(spec_path), resolve_grid(), method, make_config(run)); }; });

  auto* fit = app.add_subcommand("fit", "Residual R_K over an eps grid and its singular exponent");
  fit->add_option("--spec", spec_path, "Law of Z (JSON)")->required();
  fit->add_option("--K,--order", order, "Number of regular terms subtracted")->capture_default_str();
  eps_options(fit, "2^-2..2^-10");
  fit->add_flag("--no-cv", no_cv, "Plain ergodic averages, no control variates");
  fit->add_option("--emit-plot", plot_name, "Also write eps,residual to this file name");
  add_run_options(fit, run, "1e7");
  common(fit);
  fit->callback([&] {
    runner = [&] { return run_fit(load_spec(spec_path), order, resolve_grid(), !no_cv, plot_name, make_config(run)); };
  });

  auto* highdim = app.add_subcommand("highdim", "Block generalization: G matrices and expansion");
  highdim->add_option("--blocks", blocks_path, "Finite block law (JSON)")->required();
  highdim->add_option("--K,--order", order, "Expansion order")->capture_default_str();
  eps_options(highdim, "2^-1..2^-8");
  highdim->add_option("--method", method, "With --eps: direct, invariant or both")->capture_default_str();
  add_run_options(highdim, run, "1e6");
  common(highdim);
  highdim->callback([&] {
    runner = [&] { return run_highdim(blocks_path, order, resolve_grid(), !eps_text.empty(), method, make_config(run)); };
  });

  auto* ising = app.add_subcommand("ising", "Free energy of the disordered Ising chain");
  ising->add_option("--range", range, "Interaction range d")->capture_default_str();
  ising->add_option("--couplings", couplings_text, "alpha_1,...,alpha_d")->required();
  ising->add_option("--field-law", field_path, "Law of the field h (JSON)")->required();
  ising->add_option("--T", temperature, "Temperature")->capture_default_str();
  ising->add_option("--scan", scan_text, "Strong-coupling t grid along the model's ray");
  ising->add_option("--K,--order", order, "Strong-coupling expansion order")->capture_default_str();
  add_run_options(ising, run, "1e6");
  common(ising);
  ising->callback([&] {
    runner = [&] {
      IsingModel model;
      model.range = range;
      model.couplings = io::parse_list(couplings_text);
      model.field = io::parse_field_law(io::read_json(field_path));
      model.temperature = temperature;
      model.validate();
      const auto scan = scan_text.empty() ? std::vector<double>{} : io::parse_grid(scan_text);
      return run_ising(model, scan, order, make_config(run));
    };
  });

  auto* selftest = app.add_subcommand("selftest", "Quick built-in checks");
  common(selftest);
  selftest->callback([&] { runner = [] { return run_selftest(); }; });

  auto* replay_cmd = app.add_subcommand("replay", "Rerun a manifest and compare output checksums");
  replay_cmd->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  common(replay_cmd);
  replay_cmd->callback([&] {
    skip_output = true;
    runner = [&] {
      const std::filesystem::path m(manifest_path);
      const auto dir = run.out_dir.empty() ? m.parent_path() / "replay" : std::filesystem::path(run.out_dir);
      const auto r = replay(m, dir, run.threads == 0 ? default_threads() : run.threads);
      Outcome o;
      for (const auto& line : r.lines) o.text += line + "\n";
      o.text += r.identical ? "replay: identical\n" : "replay: outputs differ\n";
      if (r.exit_code != ok) {
        out << o.text;
        throw Error(ErrorKind::numerical, "ReplayMismatch", "replay did not reproduce the recorded outputs");
      }
      return o;
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return usage;
  }
  for (auto* sub : app.get_subcommands()) subcommand = sub->get_name();
  if (run.threads == 0) run.threads = default_threads();

  try {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome = runner();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (skip_output) {
      out << outcome.text;
      return ok;
    }
    if (run.json_output) {
      const auto it = std::find_if(outcome.files.begin(), outcome.files.end(), [](const OutputFile& f) {
        return f.name.size() > 5 && f.name.compare(f.name.size() - 5, 5, ".json") == 0;
      });
      out << (it != outcome.files.end() ? it->contents : outcome.text);
    } else {
      out << outcome.text;
    }
    if (!run.out_dir.empty()) {
      const std::filesystem::path dir(run.out_dir);
      std::filesystem::create_directories(dir);
      for (const auto& f : outcome.files) io::write_file(dir / f.name, f.contents);
      const auto manifest = make_manifest(subcommand, canonical_argv(args), outcome.config, run.threads, wall, outcome.files);
      io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    }
    return ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::validation ? validation : numerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return validation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  }
}

}  // namespace lyapexp::cli
