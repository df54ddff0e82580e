#pragma once

// Block generalization: M = [[1, eps L^T], [eps C, N]] with d-vectors L, C and a d x d
// block N, all nonnegative. The invariant vector satisfies x = (C + N x)/(1 + eps^2 L.x)
// and Lambda(eps) = E[log(1 + eps^2 L.X)].

#include "lyapexp/chain.hpp"
#include "lyapexp/coefficients.hpp"
#include "lyapexp/distributions.hpp"
#include "lyapexp/lyapunov.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace lyapexp {

using MultiIndex = std::vector<int>;

/// All lambda in N^d with |lambda| = l, lexicographically decreasing, e.g. d=2, l=2:
/// (2,0), (1,1), (0,2).
std::vector<MultiIndex> multi_indices(int d, int l);

/// C(l+d-1, d-1).
std::size_t multi_index_count(int d, int l);

struct BlockSample {
  Eigen::VectorXd L;
  Eigen::VectorXd C;
  Eigen::MatrixXd N;
};

template <class Scalar>
struct BlockAtom {
  Scalar weight;
  Vector<Scalar> L;
  Vector<Scalar> C;
  Matrix<Scalar> N;
};

/// Finite law of (L, C, N).
template <class Scalar>
struct FiniteBlockLaw {
  int d = 1;
  std::vector<BlockAtom<Scalar>> atoms;
};

/// Law of the blocks: a scalar driver law plus a map (eps, driver value) -> blocks.
/// Finite block laws use a driver over atom indices 1..n.
class BlockSpec {
 public:
  using Map = std::function<void(double eps, double driver, BlockSample& out)>;

  BlockSpec(int d, DistributionSpec driver, Map map);

  static BlockSpec from_law(const FiniteBlockLaw<Rational>& law);
  static BlockSpec from_law(const FiniteBlockLaw<double>& law);
  /// (L, C, N) = (1, Z, Z): the scalar model.
  static BlockSpec scalar(const DistributionSpec& z);

  int dim() const noexcept { return d_; }
  const DistributionSpec& driver() const noexcept { return driver_; }
  void evaluate(double eps, double driver_value, BlockSample& out) const;

  /// Law of the blocks at eps; only for finite drivers.
  FiniteBlockLaw<double> law_at(double eps) const;
  /// Exact law for ε-independent finite block laws with rational data.
  const std::optional<FiniteBlockLaw<Rational>>& exact_law() const noexcept { return exact_; }

  /// Refuses negative entries in sampled blocks (every atom of a finite driver,
  /// `trials` draws otherwise) and checks that a product of random blocks at eps
  /// becomes entrywise positive within 64 factors.
  void check_assumptions(double eps, std::size_t trials = 256, std::uint64_t seed = 1) const;

 private:
  int d_;
  DistributionSpec driver_;
  Map map_;
  std::optional<FiniteBlockLaw<Rational>> exact_;
};

struct GMatrix {
  int order = 0;
  std::vector<MultiIndex> indices;
  Matrix<double> G;
  std::optional<Matrix<Rational>> exact;
  double condition = 1.0;   // 2-norm condition number of I - G
};

/// G(l)_{lambda, lambda'} = sum over d x d nonnegative integer matrices omega with row
/// sums lambda and column sums lambda' of prod_i (lambda_i! / prod_j omega_ij!) E[N^omega],
/// so that E[(N x)^lambda] = sum_lambda' G_{lambda lambda'} x^lambda'.
template <class Scalar>
Matrix<Scalar> g_matrix_entries(const FiniteBlockLaw<Scalar>& law, int l);

/// G(l) from the eps -> 0 law of N (exact when available). Throws SingularSystem
/// when cond(I - G) exceeds 1e12 and `check` is set.
GMatrix g_matrix(const BlockSpec& spec, int l, bool check = true);

/// x' = (C + N x) / (1 + eps^2 L.x).
Eigen::VectorXd vector_chain_step(const Eigen::VectorXd& x, const BlockSample& sample, double eps);

/// Ergodic or direct-product estimate of the block Lyapunov exponent, with the same
/// replica and batch layout as the scalar engines.
LyapunovEstimate lyapunov_general(const BlockSpec& spec, double eps, const ChainConfig& cfg, Method method);

/// Per-step terms from stream (seed, 0) as in log_increments.
std::vector<double> log_increments(const BlockSpec& spec, double eps, std::size_t n, std::uint64_t seed,
                                   Method method);

/// Vector chain at eps and the eps = 0 partial sums Y_n = C_n + N_n Y_{n-1}, both from
/// 0 and driven by one block stream.
struct VectorPaths {
  std::vector<Eigen::VectorXd> chain;
  std::vector<Eigen::VectorXd> series;
};
VectorPaths coupled_vector_paths(const BlockSpec& spec, double eps, std::size_t n, std::uint64_t seed);

/// Solves A x = b by LU with partial pivoting plus iterative refinement.
struct RefinedSolve {
  Eigen::VectorXd x;
  double condition = 1.0;
  int refinements = 0;
};
RefinedSolve solve_refined(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// E[L]^T (I - E[N])^{-1} E[C] at the eps -> 0 law: the eps^2 coefficient.
double second_order_coefficient(const BlockSpec& spec);

struct ExpansionFit {
  std::vector<int> powers;               // 2..2K
  std::vector<double> coefficients;      // q_k
  std::vector<double> std_errors;
  Eigen::MatrixXd covariance;
  std::vector<int> nuisance_powers;      // extra powers fitted and discarded
  std::vector<LyapunovEstimate> estimates;
};

/// Regression of Lambda(eps) on eps^2, eps^3, ..., eps^{2K} (plus `nuisance` higher
/// powers) over the grid, with common random numbers. The covariance comes from the
/// spread of per-batch fits. K = 0 returns an empty fit.
ExpansionFit extract_expansion(const BlockSpec& spec, int order, std::span<const double> grid,
                               const ChainConfig& cfg, int nuisance = 2);

}  // namespace lyapexp
