#pragma once

// Disordered Ising chain with interactions up to range d and iid field h_n. Transfer
// matrices act on windows tau = (sigma_n, ..., sigma_{n+d-1}) in lexicographic order
// (tau_1 most significant):
//
//   A_n(tau, ups) = Z_n^{tau_1} prod_l eps_l^{[tau_1 != ups_l]} [tau_{k+1} == ups_k],
//
// with Z_n = exp(-h_n/T) and eps_l = exp(-alpha_l/T). ups_l = sigma_{n+l}, so the
// factor eps_l carries the bond between sigma_n and sigma_{n+l}.

#include "lyapexp/distributions.hpp"
#include "lyapexp/highdim.hpp"
#include "lyapexp/lyapunov.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace lyapexp {

/// Law of the field h: finite atoms or uniform on [a, b].
struct FieldLaw {
  enum class Kind { finite, uniform };
  Kind kind = Kind::finite;
  std::vector<std::pair<double, double>> atoms;  // (h, weight)
  double a = 0.0;
  double b = 0.0;

  static FieldLaw finite(std::vector<std::pair<double, double>> atoms);
  static FieldLaw constant(double h);
  static FieldLaw uniform(double a, double b);
  std::string describe() const;
};

struct IsingModel {
  int range = 1;
  std::vector<double> couplings;   // alpha_1..alpha_d >= 0
  FieldLaw field;
  double temperature = 1.0;

  void validate() const;
  std::vector<double> eps() const;
  /// Law of Z = exp(-h/T); a point mass for a constant field.
  DistributionSpec z_law() const;
};

/// 2^d x 2^d transfer matrix for couplings eps_1..eps_d and field factor z.
Eigen::MatrixXd transfer_matrix(int range, const std::vector<double>& eps, double z);
Eigen::MatrixXd transfer_matrix(const IsingModel& model, double h);

/// Free energy as the growth rate of A_n ... A_1 v with v = (1, ..., 1), renormalized
/// every step (same layout as lyapunov_direct).
LyapunovEstimate free_energy(const IsingModel& model, const ChainConfig& cfg);

struct TraceNormReport {
  double trace_rate = 0.0;   // (1/N) log Tr(A_N ... A_1)
  double norm_rate = 0.0;    // (1/N) log ||A_N ... A_1||_max
  double std_error = 0.0;    // batch-means error of the norm increments
  std::size_t n = 0;
};

TraceNormReport trace_vs_norm(const IsingModel& model, std::size_t n, std::uint64_t seed);

/// eps_l(t) = offset_l + scale_l t.
struct CouplingRay {
  std::vector<double> scale;
  std::vector<double> offset;
  std::vector<double> eps_at(double t) const;
};

/// Ray through the model's couplings: scale_l = eps_l / max eps, offset 0, so t equal to
/// the largest eps_l recovers the model.
CouplingRay default_ray(const IsingModel& model);

/// Blocks of A along the ray: A = [[1, t L^T], [t C, N]] with 2^d - 1 dimensional
/// blocks, driven by the law of Z. At t = 0 the blocks are the t -> 0 limits.
BlockSpec map_to_blocks(const IsingModel& model, const CouplingRay& ray);
BlockSpec map_to_blocks(const IsingModel& model);

struct StrongCouplingReport {
  CouplingRay ray;
  ExpansionFit fit;               // f(t) ~ sum_k q_k t^k
  double predicted_q2 = 0.0;      // E[L]^T (I - E[N])^{-1} E[C] at t -> 0
};

StrongCouplingReport strong_coupling_scan(const IsingModel& model, const CouplingRay& ray,
                                          std::span<const double> t_grid, int order, const ChainConfig& cfg);

/// Partition function of a ring of N = h.size() spins by enumeration of all 2^N
/// configurations. Oracle for small N.
double ring_partition_function(int range, const std::vector<double>& couplings, const std::vector<double>& h,
                               double temperature);

}  // namespace lyapexp
