#include "lyapexp/ising.hpp"

#include "lyapexp/errors.hpp"
#include "lyapexp/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lyapexp {

FieldLaw FieldLaw::finite(std::vector<std::pair<double, double>> atoms) {
  if (atoms.empty()) throw InvalidSpec("field law has no atoms");
  KahanSum total;
  for (const auto& [h, w] : atoms) {
    if (!std::isfinite(h)) throw InvalidSpec("field values must be finite");
    if (!(w > 0) || !std::isfinite(w)) throw InvalidSpec("field weights must be positive");
    total.add(w);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) throw InvalidSpec("field weights do not sum to 1");
  FieldLaw law;
  law.kind = Kind::finite;
  law.atoms = std::move(atoms);
  return law;
}

FieldLaw FieldLaw::constant(double h) { return finite({{h, 1.0}}); }

FieldLaw FieldLaw::uniform(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(b > a)) throw InvalidSpec("uniform field law needs a < b");
  FieldLaw law;
  law.kind = Kind::uniform;
  law.a = a;
  law.b = b;
  return law;
}

std::string FieldLaw::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == Kind::uniform) {
    os << "uniform(" << a << ", " << b << ")";
    return os.str();
  }
  os << "finite{";
  for (std::size_t i = 0; i < atoms.size(); ++i) os << (i ? ", " : "") << atoms[i].first << ":" << atoms[i].second;
  os << "}";
  return os.str();
}

void IsingModel::validate() const {
  if (range < 1 || range > 4) throw InvalidSpec("interaction range must be between 1 and 4");
  if (couplings.size() != static_cast<std::size_t>(range))
    throw InvalidSpec("need " + std::to_string(range) + " couplings, got " + std::to_string(couplings.size()));
  for (double a : couplings)
    if (!(a >= 0) || !std::isfinite(a)) throw InvalidSpec("couplings must be finite and nonnegative");
  if (!(temperature > 0) || !std::isfinite(temperature)) throw InvalidSpec("temperature must be positive");
}

std::vector<double> IsingModel::eps() const {
  validate();
  std::vector<double> out;
  for (double a : couplings) out.push_back(std::exp(-a / temperature));
  return out;
}

DistributionSpec IsingModel::z_law() const {
  validate();
  if (field.kind == FieldLaw::Kind::uniform)
    return DistributionSpec::log_uniform(std::exp(-field.b / temperature), std::exp(-field.a / temperature));
  std::vector<std::pair<double, double>> atoms;
  for (const auto& [h, w] : field.atoms) atoms.emplace_back(std::exp(-h / temperature), w);
  bool single = std::all_of(atoms.begin(), atoms.end(), [&](const auto& a) { return a.first == atoms.front().first; });
  if (single) return DistributionSpec::point_mass(atoms.front().first);
  return DistributionSpec::finite(atoms);
}

Eigen::MatrixXd transfer_matrix(int range, const std::vector<double>& eps, double z) {
  if (range < 1 || range > 4) throw InvalidArgument("interaction range must be between 1 and 4");
  if (eps.size() != static_cast<std::size_t>(range)) throw InvalidArgument("one eps per interaction range");
  const int size = 1 << range;
  auto bit = [range](int config, int l) { return (config >> (range - l)) & 1; };  // l = 1..range
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  for (int tau = 0; tau < size; ++tau) {
    for (int ups = 0; ups < size; ++ups) {
      bool shifted = true;
      for (int k = 1; k < range; ++k) shifted = shifted && bit(tau, k + 1) == bit(ups, k);
      if (!shifted) continue;
      double w = bit(tau, 1) ? z : 1.0;
      for (int l = 1; l <= range; ++l)
        if (bit(tau, 1) != bit(ups, l)) w *= eps[static_cast<std::size_t>(l - 1)];
      a(tau, ups) = w;
    }
  }
  return a;
}

Eigen::MatrixXd transfer_matrix(const IsingModel& model, double h) {
  return transfer_matrix(model.range, model.eps(), std::exp(-h / model.temperature));
}

namespace {

/// v <- A v with max-norm renormalization; returns log of the divisor.
double transfer_step(const Eigen::MatrixXd& a, Eigen::VectorXd& v, Eigen::VectorXd& scratch) {
  const Eigen::Index n = v.size();
  double norm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = a(i, 0) * v(0);
    for (Eigen::Index j = 1; j < n; ++j) acc += a(i, j) * v(j);
    scratch(i) = acc;
    norm = std::max(norm, std::abs(acc));
  }
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scratch(i) / norm;
  return std::log(norm);
}

/// A(z) = base with the rows tau_1 = 1 scaled by z.
struct TransferFamily {
  Eigen::MatrixXd base;
  Eigen::Index half;
  void at(double z, Eigen::MatrixXd& out) const {
    out = base;
    out.bottomRows(half) *= z;
  }
};

TransferFamily transfer_family(const IsingModel& model) {
  TransferFamily f;
  f.base = transfer_matrix(model.range, model.eps(), 1.0);
  f.half = f.base.rows() / 2;
  return f;
}

}  // namespace

LyapunovEstimate free_energy(const IsingModel& model, const ChainConfig& cfg) {
  model.validate();
  const auto z_law = model.z_law();
  const auto family = transfer_family(model);
  const auto plan = batch_plan(cfg);
  const Eigen::Index size = family.base.rows();
  auto replica = [&](std::size_t r) {
    Rng rng(cfg.run.seed, r);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(size), scratch(size);
    Eigen::MatrixXd a(size, size);
    auto advance = [&] {
      family.at(z_law.draw(rng), a);
      return transfer_step(a, v, scratch);
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
  LyapunovEstimate est;
  const auto eps = model.eps();
  est.eps = *std::max_element(eps.begin(), eps.end());
  est.method = Method::direct_product;
  est.value = merged.mean() / static_cast<double>(cfg.thinning);
  est.std_error = merged.std_error() / static_cast<double>(cfg.thinning);
  est.n = merged.samples();
  est.seed = cfg.run.seed;
  return est;
}

TraceNormReport trace_vs_norm(const IsingModel& model, std::size_t n, std::uint64_t seed) {
  if (n < 64) throw InvalidArgument("trace/norm comparison needs at least 64 factors");
  model.validate();
  const auto z_law = model.z_law();
  const auto family = transfer_family(model);
  const Eigen::Index size = family.base.rows();
  Rng rng(seed, 0);
  Eigen::MatrixXd product = Eigen::MatrixXd::Identity(size, size), a(size, size);
  BatchSeries series;
  const auto sizes = batch_sizes(n, 64);
  long double total = 0;
  for (std::size_t count : sizes) {
    long double sum = 0;
    for (std::size_t i = 0; i < count; ++i) {
      family.at(z_law.draw(rng), a);
      product = a * product;
      const double norm = product.cwiseAbs().maxCoeff();
      product /= norm;
      sum += std::log(norm);
    }
    total += sum;
    series.push(static_cast<double>(sum / static_cast<long double>(count)), count);
  }
  TraceNormReport r;
  r.n = n;
  const double dn = static_cast<double>(n);
  r.norm_rate = static_cast<double>(total) / dn;
  r.trace_rate = (static_cast<double>(total) + std::log(product.trace())) / dn;
  r.std_error = series.std_error();
  return r;
}

std::vector<double> CouplingRay::eps_at(double t) const {
  std::vector<double> out(scale.size());
  for (std::size_t l = 0; l < scale.size(); ++l) out[l] = (offset.empty() ? 0.0 : offset[l]) + scale[l] * t;
  return out;
}

CouplingRay default_ray(const IsingModel& model) {
  const auto eps = model.eps();
  const double top = *std::max_element(eps.begin(), eps.end());
  CouplingRay ray;
  for (double e : eps) ray.scale.push_back(e / top);
  ray.offset.assign(eps.size(), 0.0);
  return ray;
}

BlockSpec map_to_blocks(const IsingModel& model, const CouplingRay& ray) {
  model.validate();
  const int range = model.range;
  if (ray.scale.size() != static_cast<std::size_t>(range) ||
      (!ray.offset.empty() && ray.offset.size() != static_cast<std::size_t>(range)))
    throw InvalidArgument("coupling ray needs one scale and offset per interaction range");
  const int d = (1 << range) - 1;
  return BlockSpec(d, model.z_law(), [range, ray, d](double t, double z, BlockSample& out) {
    // L and C at t = 0 are the limits of A(0, .)/t and A(., 0)/t
    const double te = t == 0 ? 1e-150 : t;
    const Eigen::MatrixXd a = transfer_matrix(range, ray.eps_at(te), z);
    out.L = a.block(0, 1, 1, d).transpose() / te;
    out.C = a.block(1, 0, d, 1) / te;
    out.N = t == 0 ? Eigen::MatrixXd(transfer_matrix(range, ray.eps_at(0.0), z).block(1, 1, d, d))
                   : Eigen::MatrixXd(a.block(1, 1, d, d));
  });
}

BlockSpec map_to_blocks(const IsingModel& model) { return map_to_blocks(model, default_ray(model)); }

StrongCouplingReport strong_coupling_scan(const IsingModel& model, const CouplingRay& ray,
                                          std::span<const double> t_grid, int order, const ChainConfig& cfg) {
  StrongCouplingReport report;
  report.ray = ray;
  const auto blocks = map_to_blocks(model, ray);
  report.predicted_q2 = second_order_coefficient(blocks);
  report.fit = extract_expansion(blocks, order, t_grid, cfg);
  return report;
}

double ring_partition_function(int range, const std::vector<double>& couplings, const std::vector<double>& h,
                               double temperature) {
  const int n = static_cast<int>(h.size());
  if (n < range + 1 || n > 24) throw InvalidArgument("ring enumeration needs range < N <= 24");
  if (couplings.size() != static_cast<std::size_t>(range)) throw InvalidArgument("one coupling per range");
  KahanSum z;
  for (long config = 0; config < (1L << n); ++config) {
    auto s = [&](int k) { return static_cast<int>((config >> (((k % n) + n) % n)) & 1L); };
    double energy = 0.0;
    for (int k = 0; k < n; ++k) {
      energy += h[static_cast<std::size_t>(k)] * s(k);
      for (int l = 1; l <= range; ++l)
        if (s(k) != s(k + l)) energy += couplings[static_cast<std::size_t>(l - 1)];
    }
    z.add(std::exp(-energy / temperature));
  }
  return z.value();
}

}  // namespace lyapexp
