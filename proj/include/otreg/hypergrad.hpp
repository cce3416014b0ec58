#pragma once

#include <functional>
#include <utility>

#include "otreg/models.hpp"
#include "otreg/ot.hpp"
#include "otreg/robust.hpp"
#include "otreg/types.hpp"

namespace otreg {

/// Factorized inverse of the dual Hessian
///   M = [[diag(mu), Gbar], [Gbar^T, diag(nu_bar)]],
/// where Gbar drops the plan's last column (that dual is pinned to zero).
/// Only the (m-1) x (m-1) Schur complement K = diag(nu_bar) - Gbar^T
/// diag(mu)^{-1} Gbar is factorized, so solves stay O(n^2) in memory.
struct ImplicitSystem {
  Matrix kmat;
  Eigen::LLT<Matrix> kmat_llt;
  Matrix gbar;
  Vector inv_mu;

  /// t = M^{-1} [alpha; beta_bar].
  Vector solve(const Vector& alpha, const Vector& beta_bar) const;
};

/// Throws SingularSystem when K is not positive definite (degenerate or
/// unconverged plan).
ImplicitSystem build_implicit_system(const Matrix& plan, const Vector& mu, const Vector& nu);

/// dF/dC for F(w) = <C(w), n * Gamma(C(w))>, the upper objective with the
/// plan rescaled so every row of D1 carries unit mass. Assembled through one
/// adjoint solve against the implicit system; no (n, n, n) tensor is formed.
Matrix exact_hypergradient_weights(const Matrix& C, const SinkhornSolution& sol, double epsilon);

/// Chains the weight matrix with the per-entry cost gradients.
Vector exact_hypergradient(const Matrix& C, const CostGradient& grad_c,
                           const SinkhornSolution& sol, double epsilon);

/// dF/dC for F(w) = <C(w), n * S_r(C(w))> through the relaxed-marginal
/// solver: estimates the ball/simplex multipliers from the dual stationarity
/// conditions, eliminates the marginal block, and solves one adjoint system.
/// Zero-radius sides are treated as pinned marginals.
Matrix robust_hypergradient_weights(const Matrix& C, const RobustSolution& sol,
                                    const RobustConfig& cfg);

Vector robust_hypergradient(const Matrix& C, const CostGradient& grad_c,
                            const RobustSolution& sol, const RobustConfig& cfg);

/// Central finite differences, one objective evaluation pair per coordinate.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& objective,
                                  const Vector& w, double h);

/// Least-squares fit of (lambda_affine, lambda_ball) from the stationarity
/// condition dual + lambda_affine * 1 + 2 * lambda_ball * (moved - base)
/// + entropy_weight * log(moved) = 0, summed over the two halves of the
/// index range. A degenerate split (moved == base) pins lambda_ball to 0.
std::pair<double, double> estimate_marginal_multipliers(const Vector& dual, const Vector& moved,
                                                        const Vector& base,
                                                        double entropy_weight);

}  // namespace otreg
