#include "otreg/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "otreg/memlog.hpp"

namespace otreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogFloor = 1e-300;

double floored_log(double v) { return std::log(std::max(v, kLogFloor)); }

}  // namespace

void RobustConfig::validate() const {
  if (!(epsilon > 0.0) || !(eta > 0.0) || outer_iters <= 0 || !(tol > 0.0))
    throw std::invalid_argument("RobustConfig: epsilon, eta, outer_iters, tol must be positive");
  if (epsilon1 < 0.0 || epsilon2 < 0.0 || rho1 < 0.0 || rho2 < 0.0)
    throw std::invalid_argument("RobustConfig: epsilon1/2 and rho1/2 must be nonnegative");
}

Vector project_l2_ball(const Vector& v, const Vector& center, double rho) {
  if (v.size() != center.size())
    throw DimensionMismatch("project_l2_ball: size mismatch");
  const Vector d = v - center;
  const double sq = d.squaredNorm();
  if (sq <= rho) return v;
  return center + std::sqrt(rho / sq) * d;
}

Vector project_simplex(const Vector& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0);
}

RobustSolution robust_solve(const Matrix& C, const Vector& mu, const Vector& nu,
                            const RobustConfig& cfg) {
  const int n = static_cast<int>(C.rows());
  const int m = static_cast<int>(C.cols());
  if (mu.size() != n || nu.size() != m)
    throw DimensionMismatch("robust_solve: marginal sizes do not match cost matrix");
  if (!C.allFinite()) throw NonFinite("robust_solve: cost matrix has non-finite entries");
  validate_marginal(mu);
  validate_marginal(nu);
  cfg.validate();
  const double eps = cfg.epsilon;

  memlog::NotedBytes note(sizeof(double) * static_cast<std::size_t>(n) * m);

  Vector mu_bar = mu, nu_bar = nu;
  Vector xi = Vector::Zero(n), zeta = Vector::Zero(m);
  Vector arg(std::max(n, m));
  // A tiny mass floor keeps the entropy barrier and the duals finite when a
  // projection clips an entry to zero.
  constexpr double kMassFloor = 1e-30;

  for (int round = 0; round < cfg.outer_iters; ++round) {
    // One Sinkhorn sweep at the current (mu_bar, nu_bar), log domain.
    for (int i = 0; i < n; ++i) {
      double mx = -kInf;
      for (int j = 0; j < m; ++j) {
        const double a = (zeta[j] - C(i, j)) / eps;
        arg[j] = a;
        if (a > mx) mx = a;
      }
      if (mu_bar[i] <= 0.0 || mx == -kInf) {
        xi[i] = -kInf;
        continue;
      }
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += std::exp(arg[j] - mx);
      xi[i] = eps * (std::log(mu_bar[i]) - mx - std::log(s));
    }
    for (int j = 0; j < m; ++j) {
      double mx = -kInf;
      for (int i = 0; i < n; ++i) {
        const double a = (xi[i] - C(i, j)) / eps;
        arg[i] = a;
        if (a > mx) mx = a;
      }
      if (nu_bar[j] <= 0.0 || mx == -kInf) {
        zeta[j] = -kInf;
        continue;
      }
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += std::exp(arg[i] - mx);
      zeta[j] = eps * (std::log(nu_bar[j]) - mx - std::log(s));
    }

    // Projected gradient step on the marginals.
    Vector gmu(n), gnu(m);
    for (int i = 0; i < n; ++i) gmu[i] = xi[i] + cfg.epsilon1 * floored_log(mu_bar[i]);
    for (int j = 0; j < m; ++j) gnu[j] = zeta[j] + cfg.epsilon2 * floored_log(nu_bar[j]);
    mu_bar = project_l2_ball(project_simplex(mu_bar - cfg.eta * gmu), mu, cfg.rho1);
    nu_bar = project_l2_ball(project_simplex(nu_bar - cfg.eta * gnu), nu, cfg.rho2);
    mu_bar = mu_bar.cwiseMax(kMassFloor);
    nu_bar = nu_bar.cwiseMax(kMassFloor);
  }

  RobustSolution sol;
  sol.plan.entries.resize(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i)
      sol.plan.entries(i, j) = std::exp((xi[i] + zeta[j] - C(i, j)) / eps);
  if (!sol.plan.entries.allFinite())
    throw NonFinite("robust_solve: plan has non-finite entries");
  sol.plan.row_marginal = mu_bar;
  sol.plan.col_marginal = nu_bar;
  sol.mu_bar = mu_bar;
  sol.nu_bar = nu_bar;
  sol.mu = mu;
  sol.nu = nu;
  sol.duals = DualPotentials{xi, zeta, eps};
  sol.marginal_violation = marginal_violation(sol.plan.entries, mu_bar, nu_bar);
  sol.converged = sol.marginal_violation <= cfg.tol;
  return sol;
}

}  // namespace otreg
