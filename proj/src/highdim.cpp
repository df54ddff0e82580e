#include "lyapexp/highdim.hpp"

#include "lyapexp/errors.hpp"
#include "lyapexp/statistics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

namespace lyapexp {

std::vector<MultiIndex> multi_indices(int d, int l) {
  if (d < 1 || l < 0) throw InvalidArgument("multi-indices need d >= 1 and l >= 0");
  std::vector<MultiIndex> out;
  MultiIndex current(static_cast<std::size_t>(d), 0);
  auto fill = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == d - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      out.push_back(current);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      current[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  fill(fill, 0, l);
  return out;
}

std::size_t multi_index_count(int d, int l) {
  // C(l+d-1, d-1), exact in 64 bits for the supported range
  std::size_t c = 1;
  for (int k = 1; k <= d - 1; ++k) c = c * static_cast<std::size_t>(l + k) / static_cast<std::size_t>(k);
  return c;
}

namespace {

template <class Scalar>
void check_law_shape(const FiniteBlockLaw<Scalar>& law) {
  if (law.d < 1) throw InvalidSpec("block dimension must be at least 1");
  if (law.atoms.empty()) throw InvalidSpec("block law has no atoms");
  for (const auto& a : law.atoms) {
    if (a.L.size() != law.d || a.C.size() != law.d || a.N.rows() != law.d || a.N.cols() != law.d)
      throw InvalidSpec("block sizes do not match d = " + std::to_string(law.d));
    if (!(a.weight > Scalar(0))) throw InvalidSpec("block weights must be positive");
    auto negative = [](const auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m.data()[i] < Scalar(0)) return true;
      return false;
    };
    if (negative(a.L) || negative(a.C) || negative(a.N)) throw InvalidSpec("block entries must be nonnegative");
  }
}

DistributionSpec index_driver(const std::vector<std::pair<Rational, Rational>>& atoms) {
  if (atoms.size() == 1) return DistributionSpec::point_mass(1.0);
  return DistributionSpec::finite(atoms);
}

BlockSample to_sample(const BlockAtom<double>& a) { return {a.L, a.C, a.N}; }

template <class Scalar>
Scalar factorial(int n) {
  Scalar f(1);
  for (int k = 2; k <= n; ++k) f *= Scalar(k);
  return f;
}

}  // namespace

BlockSpec::BlockSpec(int d, DistributionSpec driver, Map map) : d_(d), driver_(std::move(driver)), map_(std::move(map)) {
  if (d < 1) throw InvalidSpec("block dimension must be at least 1");
}

BlockSpec BlockSpec::from_law(const FiniteBlockLaw<double>& law) {
  check_law_shape(law);
  std::vector<std::pair<double, double>> atoms;
  std::vector<BlockSample> table;
  for (std::size_t i = 0; i < law.atoms.size(); ++i) {
    atoms.emplace_back(static_cast<double>(i + 1), law.atoms[i].weight);
    table.push_back(to_sample(law.atoms[i]));
  }
  DistributionSpec driver = atoms.size() == 1 ? DistributionSpec::point_mass(1.0) : DistributionSpec::finite(atoms);
  return BlockSpec(law.d, std::move(driver), [table](double, double v, BlockSample& out) {
    out = table[static_cast<std::size_t>(v) - 1];
  });
}

BlockSpec BlockSpec::from_law(const FiniteBlockLaw<Rational>& law) {
  check_law_shape(law);
  std::vector<std::pair<Rational, Rational>> atoms;
  std::vector<BlockSample> table;
  for (std::size_t i = 0; i < law.atoms.size(); ++i) {
    const auto& a = law.atoms[i];
    atoms.emplace_back(Rational(static_cast<long long>(i + 1)), a.weight);
    table.push_back({a.L.unaryExpr([](const Rational& r) { return to_double(r); }),
                     a.C.unaryExpr([](const Rational& r) { return to_double(r); }),
                     a.N.unaryExpr([](const Rational& r) { return to_double(r); })});
  }
  Rational total(0);
  for (const auto& a : law.atoms) total += a.weight;
  if (total != 1) throw InvalidSpec("block weights sum to " + to_string(total) + ", not 1");
  BlockSpec spec(law.d, index_driver(atoms), [table](double, double v, BlockSample& out) {
    out = table[static_cast<std::size_t>(v) - 1];
  });
  spec.exact_ = law;
  return spec;
}

BlockSpec BlockSpec::scalar(const DistributionSpec& z) {
  BlockSpec spec(1, z, [](double, double v, BlockSample& out) {
    out.L.setConstant(1, 1.0);
    out.C.setConstant(1, v);
    out.N.setConstant(1, 1, v);
  });
  if (z.is_exact()) {
    FiniteBlockLaw<Rational> law;
    law.d = 1;
    for (const auto& a : z.atoms())
      law.atoms.push_back({*a.exact_weight, Vector<Rational>::Constant(1, Rational(1)),
                           Vector<Rational>::Constant(1, *a.exact_value),
                           Matrix<Rational>::Constant(1, 1, *a.exact_value)});
    spec.exact_ = law;
  }
  return spec;
}

void BlockSpec::evaluate(double eps, double driver_value, BlockSample& out) const { map_(eps, driver_value, out); }

FiniteBlockLaw<double> BlockSpec::law_at(double eps) const {
  if (!driver_.is_finite()) throw InvalidArgument("law_at needs a finite driver law");
  FiniteBlockLaw<double> law;
  law.d = d_;
  for (const auto& a : driver_.atoms()) {
    BlockSample s;
    evaluate(eps, a.value, s);
    law.atoms.push_back({a.weight, s.L, s.C, s.N});
  }
  return law;
}

void BlockSpec::check_assumptions(double eps, std::size_t trials, std::uint64_t seed) const {
  std::vector<BlockSample> samples;
  if (driver_.is_finite()) {
    for (const auto& a : law_at(eps).atoms) samples.push_back(to_sample(a));
  } else {
    Rng rng(seed, 0);
    for (std::size_t t = 0; t < trials; ++t) {
      BlockSample s;
      evaluate(eps, driver_.draw(rng), s);
      samples.push_back(std::move(s));
    }
  }
  for (const auto& s : samples) {
    if (s.L.size() != d_ || s.C.size() != d_ || s.N.rows() != d_ || s.N.cols() != d_)
      throw InvalidSpec("block map returned blocks of the wrong size");
    if ((s.L.array() < 0).any() || (s.C.array() < 0).any() || (s.N.array() < 0).any())
      throw InvalidSpec("block entries must be nonnegative");
  }
  if (eps == 0) return;
  Rng rng(seed, 1);
  Eigen::MatrixXd product = Eigen::MatrixXd::Identity(d_ + 1, d_ + 1);
  for (int k = 0; k < 64; ++k) {
    BlockSample s;
    evaluate(eps, driver_.draw(rng), s);
    Eigen::MatrixXd m(d_ + 1, d_ + 1);
    m(0, 0) = 1.0;
    m.block(0, 1, 1, d_) = eps * s.L.transpose();
    m.block(1, 0, d_, 1) = eps * s.C;
    m.block(1, 1, d_, d_) = s.N;
    product = m * product;
    product /= product.maxCoeff();
    if ((product.array() > 0).all()) return;
  }
  throw InvalidSpec("no positive product of 64 random blocks (primitivity witness not found)");
}

template <class Scalar>
Matrix<Scalar> g_matrix_entries(const FiniteBlockLaw<Scalar>& law, int l) {
  const int d = law.d;
  const auto indices = multi_indices(d, l);
  std::map<MultiIndex, Eigen::Index> position;
  for (std::size_t i = 0; i < indices.size(); ++i) position[indices[i]] = static_cast<Eigen::Index>(i);
  const auto size = static_cast<Eigen::Index>(indices.size());
  Matrix<Scalar> g = Matrix<Scalar>::Zero(size, size);

  // powers[a](i, j)[k] = N_ij^k for atom a
  std::vector<std::vector<std::vector<Scalar>>> powers(law.atoms.size());
  for (std::size_t a = 0; a < law.atoms.size(); ++a) {
    powers[a].resize(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        auto& p = powers[a][static_cast<std::size_t>(i * d + j)];
        p.assign(static_cast<std::size_t>(l) + 1, Scalar(1));
        for (int k = 1; k <= l; ++k) p[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k) - 1] * law.atoms[a].N(i, j);
      }
  }
  std::vector<Scalar> fact(static_cast<std::size_t>(l) + 1);
  for (int k = 0; k <= l; ++k) fact[static_cast<std::size_t>(k)] = factorial<Scalar>(k);

  std::vector<int> omega(static_cast<std::size_t>(d * d), 0);
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const auto& lambda = indices[row];
    // fill row i of omega with a weak composition of lambda_i, then recurse
    auto fill = [&](auto&& self, int i, int j, int remaining, const Scalar& coeff) -> void {
      if (i == d) {
        MultiIndex col_sum(static_cast<std::size_t>(d), 0);
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) col_sum[static_cast<std::size_t>(c)] += omega[static_cast<std::size_t>(r * d + c)];
        Scalar expectation(0);
        for (std::size_t a = 0; a < law.atoms.size(); ++a) {
          Scalar term = law.atoms[a].weight;
          for (int e = 0; e < d * d; ++e)
            if (omega[static_cast<std::size_t>(e)] > 0)
              term *= powers[a][static_cast<std::size_t>(e)][static_cast<std::size_t>(omega[static_cast<std::size_t>(e)])];
          expectation += term;
        }
        g(static_cast<Eigen::Index>(row), position.at(col_sum)) += coeff * expectation;
        return;
      }
      if (j == d - 1) {
        omega[static_cast<std::size_t>(i * d + j)] = remaining;
        const Scalar next = coeff * fact[static_cast<std::size_t>(lambda[static_cast<std::size_t>(i)])] /
                            fact[static_cast<std::size_t>(remaining)];
        const int following = i + 1 < d ? lambda[static_cast<std::size_t>(i + 1)] : 0;
        self(self, i + 1, 0, following, next);
        return;
      }
      for (int v = remaining; v >= 0; --v) {
        omega[static_cast<std::size_t>(i * d + j)] = v;
        self(self, i, j + 1, remaining - v, coeff / fact[static_cast<std::size_t>(v)]);
      }
    };
    fill(fill, 0, 0, lambda[0], Scalar(1));
  }
  return g;
}

template Matrix<Rational> g_matrix_entries(const FiniteBlockLaw<Rational>&, int);
template Matrix<double> g_matrix_entries(const FiniteBlockLaw<double>&, int);

namespace {

double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smallest = s(s.size() - 1);
  return smallest > 0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
}

FiniteBlockLaw<double> limit_law(const BlockSpec& spec, std::size_t draws = 100'000) {
  if (spec.driver().is_finite()) return spec.law_at(0.0);
  // empirical law of the blocks at eps = 0
  FiniteBlockLaw<double> law;
  law.d = spec.dim();
  Rng rng(0x6d61747269780000ULL, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    BlockSample s;
    spec.evaluate(0.0, spec.driver().draw(rng), s);
    law.atoms.push_back({1.0 / static_cast<double>(draws), s.L, s.C, s.N});
  }
  return law;
}

}  // namespace

GMatrix g_matrix(const BlockSpec& spec, int l, bool check) {
  if (l < 0) throw InvalidArgument("G matrix order must be nonnegative");
  GMatrix out;
  out.order = l;
  out.indices = multi_indices(spec.dim(), l);
  if (spec.exact_law()) {
    out.exact = g_matrix_entries(*spec.exact_law(), l);
    out.G = out.exact->unaryExpr([](const Rational& r) { return to_double(r); });
  } else {
    out.G = g_matrix_entries(limit_law(spec), l);
  }
  const Eigen::MatrixXd i_minus_g = Eigen::MatrixXd::Identity(out.G.rows(), out.G.cols()) - out.G;
  out.condition = condition_number(i_minus_g);
  if (check && !(out.condition <= 1e12))
    throw SingularSystem("I - G(" + std::to_string(l) + ") has condition number " + std::to_string(out.condition));
  return out;
}

Eigen::VectorXd vector_chain_step(const Eigen::VectorXd& x, const BlockSample& s, double eps) {
  const Eigen::Index d = x.size();
  double dot = s.L(0) * x(0);
  for (Eigen::Index j = 1; j < d; ++j) dot += s.L(j) * x(j);
  const double den = 1.0 + eps * eps * dot;
  Eigen::VectorXd out(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double num = s.C(i);
    for (Eigen::Index j = 0; j < d; ++j) num += s.N(i, j) * x(j);
    out(i) = num / den;
  }
  return out;
}

namespace {

/// In-place vector chain update; returns log(1 + eps^2 L.x) at the old state.
double vector_update(Eigen::VectorXd& x, Eigen::VectorXd& scratch, const BlockSample& s, double e2) {
  const Eigen::Index d = x.size();
  double dot = s.L(0) * x(0);
  for (Eigen::Index j = 1; j < d; ++j) dot += s.L(j) * x(j);
  const double term = std::log1p(e2 * dot);
  const double den = 1.0 + e2 * dot;
  for (Eigen::Index i = 0; i < d; ++i) {
    double num = s.C(i);
    for (Eigen::Index j = 0; j < d; ++j) num += s.N(i, j) * x(j);
    scratch(i) = num / den;
  }
  x.swap(scratch);
  return term;
}

/// Direct step of (v0, w) <- M (v0, w); returns log of the max-norm divisor.
double direct_update(double& v0, Eigen::VectorXd& w, Eigen::VectorXd& scratch, const BlockSample& s, double eps) {
  const Eigen::Index d = w.size();
  double dot = s.L(0) * w(0);
  for (Eigen::Index j = 1; j < d; ++j) dot += s.L(j) * w(j);
  const double a = v0 + eps * dot;
  double norm = std::abs(a);
  for (Eigen::Index i = 0; i < d; ++i) {
    double acc = (eps * s.C(i)) * v0;
    for (Eigen::Index j = 0; j < d; ++j) acc += s.N(i, j) * w(j);
    scratch(i) = acc;
    norm = std::max(norm, std::abs(acc));
  }
  v0 = a / norm;
  for (Eigen::Index i = 0; i < d; ++i) w(i) = scratch(i) / norm;
  return std::log(norm);
}

BlockSample empty_sample(int d) {
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
}

/// Lockstep invariant-chain run of a block law over a grid; batch series per eps.
std::vector<BatchSeries> run_block_grid(const BlockSpec& spec, std::span<const double> grid, const ChainConfig& cfg) {
  if (grid.empty()) throw InvalidArgument("empty eps grid");
  for (double eps : grid)
    if (!std::isfinite(eps)) throw InvalidArgument("eps must be finite");
  if (cfg.check_assumptions)
    for (double eps : grid) spec.check_assumptions(eps);
  const auto plan = batch_plan(cfg);
  const int d = spec.dim();
  auto replica = [&](std::size_t r) {
    Rng rng(cfg.run.seed, r);
    const std::size_t points = grid.size();
    std::vector<Eigen::VectorXd> x(points, Eigen::VectorXd::Zero(d));
    Eigen::VectorXd scratch(d);
    std::vector<BlockSample> samples(points, empty_sample(d));
    std::vector<double> e2(points);
    for (std::size_t e = 0; e < points; ++e) e2[e] = grid[e] * grid[e];
    auto advance = [&](std::vector<double>* terms) {
      const double v = spec.driver().draw(rng);
      for (std::size_t e = 0; e < points; ++e) {
        spec.evaluate(grid[e], v, samples[e]);
        const double term = vector_update(x[e], scratch, samples[e], e2[e]);
        if (terms) (*terms)[e] = term;
      }
    };
    for (std::size_t i = 0; i < cfg.burn_in; ++i) advance(nullptr);
    std::vector<BatchSeries> out(points);
    std::vector<double> terms(points);
    std::vector<long double> sums(points);
    for (std::size_t count : plan[r]) {
      std::fill(sums.begin(), sums.end(), 0.0L);
      for (std::size_t i = 0; i < count; ++i) {
        advance(&terms);
        for (std::size_t e = 0; e < points; ++e) sums[e] += terms[e];
        for (std::size_t t = 1; t < cfg.thinning; ++t) advance(nullptr);
      }
      for (std::size_t e = 0; e < points; ++e)
        out[e].push(static_cast<double>(sums[e] / static_cast<long double>(count)), count);
    }
    return out;
  };
  auto parts = parallel_map(cfg.run.replicas, cfg.run.threads, replica);
  std::vector<BatchSeries> merged(grid.size());
  for (const auto& part : parts)
    for (std::size_t e = 0; e < grid.size(); ++e) merged[e].append(part[e]);
  return merged;
}

LyapunovEstimate summarize(double eps, Method method, const BatchSeries& series, const ChainConfig& cfg) {
  LyapunovEstimate est;
  est.eps = eps;
  est.method = method;
  est.value = series.mean();
  est.std_error = series.std_error();
  est.n = series.samples();
  est.seed = cfg.run.seed;
  return est;
}

}  // namespace

LyapunovEstimate lyapunov_general(const BlockSpec& spec, double eps, const ChainConfig& cfg, Method method) {
  if (method == Method::invariant_formula)
    return summarize(eps, method, run_block_grid(spec, std::span<const double>(&eps, 1), cfg).front(), cfg);

  if (!std::isfinite(eps)) throw InvalidArgument("eps must be finite");
  if (cfg.check_assumptions) spec.check_assumptions(eps);
  const auto plan = batch_plan(cfg);
  const int d = spec.dim();
  auto replica = [&](std::size_t r) {
    Rng rng(cfg.run.seed, r);
    double v0 = 1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(d), scratch(d);
    BlockSample s = empty_sample(d);
    auto advance = [&] {
      spec.evaluate(eps, spec.driver().draw(rng), s);
      return direct_update(v0, w, scratch, s, eps);
    };
    for (std::size_t i = 0; i < cfg.burn_in; ++i) advance();
    BatchSeries series;
    for (std::size_t count : plan[r]) {
      long double sum = 0;
      for (std::size_t i = 0; i < count; ++i) {
        double inc = 0;
        for (std::size_t t = 0; t < cfg.thinning; ++t) inc += advance();
        sum += inc;
      }
      series.push(static_cast<double>(sum / static_cast<long double>(count)), count);
    }
    return series;
  };
  BatchSeries merged;
  for (const auto& part : parallel_map(cfg.run.replicas, cfg.run.threads, replica)) merged.append(part);
  auto est = summarize(eps, method, merged, cfg);
  est.value /= static_cast<double>(cfg.thinning);
  est.std_error /= static_cast<double>(cfg.thinning);
  return est;
}

std::vector<double> log_increments(const BlockSpec& spec, double eps, std::size_t n, std::uint64_t seed,
                                   Method method) {
  Rng rng(seed, 0);
  const int d = spec.dim();
  std::vector<double> out(n);
  BlockSample s = empty_sample(d);
  Eigen::VectorXd scratch(d);
  if (method == Method::direct_product) {
    double v0 = 1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(d);
    for (auto& v : out) {
      spec.evaluate(eps, spec.driver().draw(rng), s);
      v = direct_update(v0, w, scratch, s, eps);
    }
  } else {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    for (auto& v : out) {
      spec.evaluate(eps, spec.driver().draw(rng), s);
      v = vector_update(x, scratch, s, eps * eps);
    }
  }
  return out;
}

VectorPaths coupled_vector_paths(const BlockSpec& spec, double eps, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 0);
  const int d = spec.dim();
  VectorPaths paths;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d), y = Eigen::VectorXd::Zero(d);
  BlockSample s = empty_sample(d);
  for (std::size_t i = 0; i < n; ++i) {
    spec.evaluate(eps, spec.driver().draw(rng), s);
    x = vector_chain_step(x, s, eps);
    y = s.C + s.N * y;
    paths.chain.push_back(x);
    paths.series.push_back(y);
  }
  return paths;
}

RefinedSolve solve_refined(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  RefinedSolve out;
  out.condition = condition_number(a);
  if (!(out.condition <= 1e12)) throw SingularSystem("linear system has condition number " + std::to_string(out.condition));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  out.x = lu.solve(b);
  const LongMatrix al = a.cast<long double>();
  const LongVector bl = b.cast<long double>();
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd r = (bl - al * out.x.cast<long double>()).cast<double>();
    const Eigen::VectorXd dx = lu.solve(r);
    out.x += dx;
    ++out.refinements;
    if (dx.norm() <= 1e-17 * out.x.norm()) break;
  }
  return out;
}

double second_order_coefficient(const BlockSpec& spec) {
  const auto law = limit_law(spec);
  const int d = law.d;
  Eigen::VectorXd el = Eigen::VectorXd::Zero(d), ec = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd en = Eigen::MatrixXd::Zero(d, d);
  for (const auto& a : law.atoms) {
    el += a.weight * a.L;
    ec += a.weight * a.C;
    en += a.weight * a.N;
  }
  const auto solve = solve_refined(Eigen::MatrixXd::Identity(d, d) - en, ec);
  return el.dot(solve.x);
}

ExpansionFit extract_expansion(const BlockSpec& spec, int order, std::span<const double> grid, const ChainConfig& cfg,
                               int nuisance) {
  if (order < 0 || nuisance < 0) throw InvalidArgument("K and the nuisance count must be nonnegative");
  ExpansionFit fit;
  if (order == 0) return fit;
  for (int l = 1; l <= order; ++l) g_matrix(spec, l);
  for (int p = 2; p <= 2 * order; ++p) fit.powers.push_back(p);
  for (int p = 1; p <= nuisance; ++p) fit.nuisance_powers.push_back(2 * order + p);
  const std::size_t n_params = fit.powers.size() + fit.nuisance_powers.size();
  if (grid.size() < n_params + 2)
    throw InsufficientSignal("grid of " + std::to_string(grid.size()) + " points cannot support " +
                             std::to_string(n_params) + " coefficients");

  const auto series = run_block_grid(spec, grid, cfg);
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(n_params));
  Eigen::VectorXd weights(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eps = grid[static_cast<std::size_t>(i)];
    Eigen::Index c = 0;
    for (int p : fit.powers) design(i, c++) = std::pow(eps, p);
    for (int p : fit.nuisance_powers) design(i, c++) = std::pow(eps, p);
    const auto& s = series[static_cast<std::size_t>(i)];
    const double se = s.std_error();
    if (!(se > 0)) throw InsufficientSignal("zero variance at eps = " + std::to_string(eps));
    weights(i) = 1.0 / (se * se);
    y(i) = s.mean();
    fit.estimates.push_back(summarize(eps, Method::invariant_formula, s, cfg));
  }
  const auto whole = weighted_least_squares(design, y, weights);

  // per-batch fits share the design, so their spread gives the covariance
  const std::size_t batches = series.front().size();
  std::vector<Eigen::VectorXd> per_batch;
  for (std::size_t b = 0; b < batches; ++b) {
    Eigen::VectorXd yb(n);
    for (Eigen::Index i = 0; i < n; ++i) yb(i) = series[static_cast<std::size_t>(i)].means[b];
    per_batch.push_back(weighted_least_squares(design, yb, weights).coefficients);
  }
  Eigen::VectorXd centre = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  for (const auto& c : per_batch) centre += c;
  centre /= static_cast<double>(batches);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_params), static_cast<Eigen::Index>(n_params));
  for (const auto& c : per_batch) cov += (c - centre) * (c - centre).transpose();
  cov /= static_cast<double>(batches) * static_cast<double>(batches - 1);

  const auto k = static_cast<Eigen::Index>(fit.powers.size());
  fit.covariance = cov.topLeftCorner(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    fit.coefficients.push_back(whole.coefficients(i));
    fit.std_errors.push_back(std::sqrt(cov(i, i)));
  }
  return fit;
}

}  // namespace lyapexp
