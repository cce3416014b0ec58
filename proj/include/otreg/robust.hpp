#pragma once

#include "otreg/ot.hpp"
#include "otreg/types.hpp"

namespace otreg {

struct RobustConfig {
  double epsilon = 1e-2;   // plan entropy weight
  double epsilon1 = 1e-3;  // row-marginal entropy weight
  double epsilon2 = 1e-3;  // column-marginal entropy weight
  double rho1 = 1e-3;      // squared L2 budget for the row marginal
  double rho2 = 1e-3;      // squared L2 budget for the column marginal
  double eta = 1e-3;       // marginal gradient step
  int outer_iters = 500;
  double tol = 1e-7;  // plan feasibility against the relaxed marginals

  void validate() const;
};

struct RobustSolution {
  TransportPlan plan;  // marginals are (mu_bar, nu_bar)
  Vector mu_bar;
  Vector nu_bar;
  Vector mu;  // base marginals the deviation balls are centred on
  Vector nu;
  DualPotentials duals;
  bool converged = false;
  double marginal_violation = 0.0;
};

/// Euclidean projection onto {u : ||u - center||_2^2 <= rho}.
Vector project_l2_ball(const Vector& v, const Vector& center, double rho);

/// Euclidean projection onto the probability simplex.
Vector project_simplex(const Vector& v);

/// Relaxed-marginal entropic transport: alternates one Sinkhorn sweep with a
/// projected gradient step on the marginals (simplex projection, then the
/// L2 ball). The marginal step descends along the dual potentials plus the
/// marginal-entropy barrier, so fixed points satisfy the KKT system that
/// robust_hypergradient differentiates. Runs in the log domain throughout.
RobustSolution robust_solve(const Matrix& C, const Vector& mu, const Vector& nu,
                            const RobustConfig& cfg);

}  // namespace otreg
