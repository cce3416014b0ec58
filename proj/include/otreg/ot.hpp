#pragma once

#include <vector>

#include "otreg/types.hpp"

namespace otreg {

struct SinkhornConfig {
  double epsilon = 1e-2;  // entropy weight
  int max_iters = 10000;
  double tol = 1e-9;  // L-inf marginal violation
};

/// Sinkhorn scaling vectors in log form: xi = eps*log p, zeta = eps*log q.
/// The plan factorizes as Gamma_ij = exp((xi_i + zeta_j - C_ij) / eps).
struct DualPotentials {
  Vector xi;
  Vector zeta;
  double epsilon = 1.0;

  Vector p() const { return (xi / epsilon).array().exp(); }
  Vector q() const { return (zeta / epsilon).array().exp(); }
};

struct TransportPlan {
  Matrix entries;
  Vector row_marginal;
  Vector col_marginal;
};

struct SinkhornSolution {
  TransportPlan plan;
  DualPotentials duals;
  int iterations = 0;
  bool converged = false;
  double marginal_violation = 0.0;
};

/// Throws if v has negative/non-finite entries or does not sum to 1.
void validate_marginal(const Vector& v, double tol = 1e-12);

/// L-inf violation of the prescribed marginals.
double marginal_violation(const Matrix& plan, const Vector& mu, const Vector& nu);

/// Entropic optimal transport by Sinkhorn scaling. Starts with plain
/// multiplicative updates and switches to log-domain updates (log-sum-exp)
/// as soon as any scaling vector leaves [1e-300, 1e300] or a product
/// degenerates, so small epsilon is safe. `warm_start`, when given, seeds
/// the column potential.
SinkhornSolution sinkhorn_solve(const Matrix& C, const Vector& mu, const Vector& nu,
                                const SinkhornConfig& cfg,
                                const DualPotentials* warm_start = nullptr);

/// Rescale a plan with uniform 1/n marginals to correspondence scale
/// (entries multiplied by n; every row/column then sums to one).
TransportPlan scale_plan(const TransportPlan& plan, int n);

/// Inverse of scale_plan.
TransportPlan unscale_plan(const TransportPlan& plan, int n);

/// <C,S> + eps * sum S_ij log S_ij, with 0 log 0 = 0.
double entropic_objective(const Matrix& C, const Matrix& S, double epsilon);

struct Assignment {
  std::vector<int> perm;  // row i -> column perm[i]
  double cost = 0.0;
};

/// Exact minimum over all permutations by enumeration; n <= 9.
/// Ties resolved toward the lexicographically smallest permutation.
Assignment assignment_bruteforce(const Matrix& C);

/// Exact assignment via shortest augmenting paths (Jonker-Volgenant style),
/// O(n^3). Returns a vertex of the Birkhoff polytope.
Assignment assignment_lp(const Matrix& C);

/// Greedy rounding: repeatedly take the largest unassigned entry, scanning
/// row-major so ties are deterministic.
std::vector<int> round_to_permutation(const Matrix& S);

double assignment_cost(const Matrix& C, const std::vector<int>& perm);

}  // namespace otreg
