#include "otreg/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otreg/memlog.hpp"

namespace otreg {

namespace {

constexpr double kScaleLo = 1e-300;
constexpr double kScaleHi = 1e300;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool scaling_ok(const Vector& v) {
  for (int i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (!std::isfinite(x) || x < kScaleLo || x > kScaleHi) return false;
  }
  return true;
}

Vector safe_log(const Vector& v) {
  Vector out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? std::log(v[i]) : -kInf;
  return out;
}

Matrix plan_from_duals(const Matrix& C, const Vector& xi, const Vector& zeta, double eps) {
  Matrix plan(C.rows(), C.cols());
  for (int j = 0; j < C.cols(); ++j)
    for (int i = 0; i < C.rows(); ++i)
      plan(i, j) = std::exp((xi[i] + zeta[j] - C(i, j)) / eps);
  return plan;
}

void fill_plan(const Matrix& C, const Vector& xi, const Vector& zeta, double eps,
               Matrix& plan) {
  for (int j = 0; j < C.cols(); ++j)
    for (int i = 0; i < C.rows(); ++i)
      plan(i, j) = std::exp((xi[i] + zeta[j] - C(i, j)) / eps);
}

// One damped Newton step on the dual objective (last zeta pinned to fix the
// gauge). Returns true when the step reduced the marginal violation.
bool newton_polish(const Matrix& C, const Vector& mu, const Vector& nu, double eps, Vector& xi,
                   Vector& zeta, Matrix& plan, double& viol) {
  const int n = static_cast<int>(C.rows());
  const int m = static_cast<int>(C.cols());
  const Vector rowsum = plan.rowwise().sum();
  const Vector colsum = plan.colwise().sum();
  if (rowsum.minCoeff() <= 0.0 || colsum.minCoeff() <= 0.0) return false;

  Vector resid(n + m - 1);
  resid.head(n) = mu - rowsum;
  resid.tail(m - 1) = (nu - colsum).head(m - 1);

  // Block solve of M d = eps * resid with M = [[diag(rowsum), Pbar],
  // [Pbar^T, diag(colsum_bar)]] through the Schur complement.
  const Vector inv_row = rowsum.cwiseInverse();
  Vector d(n + m - 1);
  if (m > 1) {
    const auto pbar = plan.leftCols(m - 1);
    Matrix kmat = Matrix(colsum.head(m - 1).asDiagonal());
    memlog::NotedBytes k_note(sizeof(double) * static_cast<std::size_t>(m - 1) * (m - 1));
    kmat.noalias() -= pbar.transpose() * inv_row.asDiagonal() * pbar;
    Eigen::LLT<Matrix> llt(kmat);
    if (llt.info() != Eigen::Success) {
      // Near-permutation plans make the Schur complement numerically
      // semidefinite; a marginal-scale ridge keeps the live modes intact.
      kmat.diagonal().array() += 1e-11 * colsum.head(m - 1).maxCoeff();
      llt.compute(kmat);
      if (llt.info() != Eigen::Success) return false;
    }
    const Vector da = inv_row.cwiseProduct(resid.head(n));
    const Vector y = llt.solve(pbar.transpose() * da - resid.tail(m - 1));
    d.head(n) = inv_row.cwiseProduct(resid.head(n) + pbar * y);
    d.tail(m - 1) = -y;
  } else {
    d = inv_row.cwiseProduct(resid.head(n));
  }
  d *= eps;
  if (!d.allFinite()) return false;

  for (double step = 1.0; step >= 1.0 / 16; step /= 2) {
    const Vector xi_try = xi + step * d.head(n);
    Vector zeta_try = zeta;
    zeta_try.head(m - 1) += step * d.tail(m - 1);
    Matrix plan_try(n, m);
    fill_plan(C, xi_try, zeta_try, eps, plan_try);
    if (!plan_try.allFinite()) continue;
    const double viol_try = marginal_violation(plan_try, mu, nu);
    if (viol_try < viol) {
      xi = xi_try;
      zeta = zeta_try;
      plan = plan_try;
      viol = viol_try;
      return true;
    }
  }
  return false;
}

// Log-domain Gauss-Seidel sweeps at a fixed temperature; updates (xi, zeta)
// in place and returns the final marginal violation. `plan` is reused as the
// violation workspace. When sweeps stagnate near the solution, Newton steps
// on the duals punch through the slow (near-tie) modes.
double log_sweeps(const Matrix& C, const Vector& mu, const Vector& nu, const Vector& log_mu,
                  const Vector& log_nu, double eps, double tol, int budget, Vector& xi,
                  Vector& zeta, Matrix& plan, int& iterations, bool& converged,
                  bool allow_newton) {
  const int n = static_cast<int>(C.rows());
  const int m = static_cast<int>(C.cols());
  Vector arg(std::max(n, m));
  double viol = kInf;
  double prev_viol = kInf;
  converged = false;
  const double newton_gate = 0.3 * std::max(mu.maxCoeff(), nu.maxCoeff());
  for (int sweep = 0; sweep < budget; ++sweep) {
    ++iterations;
    for (int i = 0; i < n; ++i) {
      double mx = -kInf;
      for (int j = 0; j < m; ++j) {
        const double a = (zeta[j] - C(i, j)) / eps;
        arg[j] = a;
        if (a > mx) mx = a;
      }
      if (mx == -kInf || log_mu[i] == -kInf) {
        xi[i] = -kInf;
        continue;
      }
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += std::exp(arg[j] - mx);
      xi[i] = eps * (log_mu[i] - mx - std::log(s));
    }
    for (int j = 0; j < m; ++j) {
      double mx = -kInf;
      for (int i = 0; i < n; ++i) {
        const double a = (xi[i] - C(i, j)) / eps;
        arg[i] = a;
        if (a > mx) mx = a;
      }
      if (mx == -kInf || log_nu[j] == -kInf) {
        zeta[j] = -kInf;
        continue;
      }
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += std::exp(arg[i] - mx);
      zeta[j] = eps * (log_nu[j] - mx - std::log(s));
    }
    if (xi.hasNaN() || zeta.hasNaN())
      throw NonFinite("sinkhorn_solve: log-domain iterate became NaN");
    fill_plan(C, xi, zeta, eps, plan);
    viol = marginal_violation(plan, mu, nu);
    if (viol <= tol) {
      converged = true;
      return viol;
    }
    const bool stagnant = viol > 0.9 * prev_viol;
    prev_viol = viol;
    if (allow_newton && stagnant && viol <= newton_gate) {
      for (int k = 0; k < 60 && sweep + 1 < budget; ++k) {
        ++sweep;
        ++iterations;
        if (!newton_polish(C, mu, nu, eps, xi, zeta, plan, viol)) break;
        if (viol <= tol) {
          converged = true;
          return viol;
        }
      }
    }
  }
  return viol;
}

}  // namespace

void validate_marginal(const Vector& v, double tol) {
  if (v.size() == 0) throw DimensionMismatch("marginal is empty");
  double sum = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0)
      throw NonFinite("marginal entries must be finite and nonnegative");
    sum += v[i];
  }
  if (std::abs(sum - 1.0) > tol * std::max<double>(1, v.size()))
    throw NonUniformMarginals("marginal must sum to 1, got " + std::to_string(sum));
}

double marginal_violation(const Matrix& plan, const Vector& mu, const Vector& nu) {
  const double row = (plan.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  const double col = (plan.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff();
  return std::max(row, col);
}

SinkhornSolution sinkhorn_solve(const Matrix& C, const Vector& mu, const Vector& nu,
                                const SinkhornConfig& cfg, const DualPotentials* warm_start) {
  const int n = static_cast<int>(C.rows());
  const int m = static_cast<int>(C.cols());
  if (mu.size() != n || nu.size() != m)
    throw DimensionMismatch("sinkhorn_solve: marginal sizes do not match cost matrix");
  if (!C.allFinite()) throw NonFinite("sinkhorn_solve: cost matrix has non-finite entries");
  validate_marginal(mu);
  validate_marginal(nu);
  const double eps = cfg.epsilon;
  if (!(eps > 0.0) || !(cfg.tol > 0.0) || cfg.max_iters <= 0)
    throw std::invalid_argument("sinkhorn_solve: invalid config");

  const Vector log_mu = safe_log(mu);
  const Vector log_nu = safe_log(nu);
  const double cost_range = C.maxCoeff() - C.minCoeff();

  bool log_mode = false;
  Vector p = mu, q = nu;
  Vector xi = Vector::Zero(n), zeta = Vector::Zero(m);
  const bool warm = warm_start != nullptr && warm_start->zeta.size() == m &&
                    warm_start->xi.size() == n && warm_start->xi.allFinite() &&
                    warm_start->zeta.allFinite();
  if (warm) {
    xi = warm_start->xi;
    zeta = warm_start->zeta;
    log_mode = true;  // warm duals are held in log form; stay there
  }
  // Plain multiplicative scaling is only reliable while the kernel spread
  // stays comfortably inside double range.
  if (cost_range > 45.0 * eps) log_mode = true;

  Matrix G;
  memlog::NotedBytes g_note(log_mode ? 0 : sizeof(double) * static_cast<std::size_t>(n) * m);
  if (!log_mode) {
    G = (-C / eps).array().exp();
    if (!G.allFinite()) log_mode = true;
  }

  int it = 0;
  double viol = kInf;
  bool converged = false;

  if (!log_mode) {
    Vector gq = G * q;
    for (; it < cfg.max_iters; ++it) {
      const Vector p_new = mu.cwiseQuotient(gq);
      if (!scaling_ok(p_new)) {
        log_mode = true;  // q still holds the last valid column scaling
        zeta = eps * safe_log(q);
        break;
      }
      p = p_new;
      const Vector q_new = nu.cwiseQuotient(G.transpose() * p);
      if (!scaling_ok(q_new)) {
        log_mode = true;
        zeta = eps * safe_log(q);
        break;
      }
      q = q_new;
      gq = G * q;
      viol = (p.cwiseProduct(gq) - mu).cwiseAbs().maxCoeff();
      if (viol <= cfg.tol) {
        ++it;
        converged = true;
        break;
      }
    }
    if (!log_mode) {
      xi = eps * safe_log(p);
      zeta = eps * safe_log(q);
    }
  }

  if (log_mode && !converged) {
    Matrix plan(n, m);
    memlog::NotedBytes plan_note(sizeof(double) * static_cast<std::size_t>(n) * m);
    // Temperature schedule: cold starts at small eps crawl, so anneal the
    // duals geometrically down to the target before the final refinement.
    if (!warm && cost_range > 16.0 * eps) {
      // The levels only warm-start the duals, so a coarse tolerance and a
      // small sweep budget per level suffice.
      const double loose = std::max(cfg.tol, 1e-2 * std::max(mu.maxCoeff(), nu.maxCoeff()));
      double level = cost_range / 8.0;
      while (level > eps && it < cfg.max_iters) {
        bool level_done = false;
        log_sweeps(C, mu, nu, log_mu, log_nu, level, loose,
                   std::min(cfg.max_iters - it, 30), xi, zeta, plan, it, level_done,
                   /*allow_newton=*/false);
        level /= 4.0;
      }
    }
    viol = log_sweeps(C, mu, nu, log_mu, log_nu, eps, cfg.tol, cfg.max_iters - it, xi, zeta,
                      plan, it, converged, /*allow_newton=*/true);
  }

  SinkhornSolution sol;
  sol.plan.entries = plan_from_duals(C, xi, zeta, eps);
  sol.plan.row_marginal = mu;
  sol.plan.col_marginal = nu;
  sol.duals = DualPotentials{xi, zeta, eps};
  sol.iterations = it;
  sol.marginal_violation = marginal_violation(sol.plan.entries, mu, nu);
  sol.converged = converged && sol.marginal_violation <= cfg.tol;
  if (!sol.plan.entries.allFinite())
    throw NonFinite("sinkhorn_solve: plan has non-finite entries");
  return sol;
}

TransportPlan scale_plan(const TransportPlan& plan, int n) {
  if (plan.entries.rows() != n || plan.entries.cols() != n)
    throw DimensionMismatch("scale_plan: plan must be n x n");
  const double uniform = 1.0 / n;
  auto is_uniform = [&](const Vector& v) {
    return v.size() == n && (v.array() - uniform).abs().maxCoeff() <= 1e-12;
  };
  if (!is_uniform(plan.row_marginal) || !is_uniform(plan.col_marginal))
    throw NonUniformMarginals("scale_plan: marginals are not uniform 1/n");
  TransportPlan out;
  out.entries = plan.entries * static_cast<double>(n);
  out.row_marginal = Vector::Ones(n);
  out.col_marginal = Vector::Ones(n);
  return out;
}

TransportPlan unscale_plan(const TransportPlan& plan, int n) {
  if (plan.entries.rows() != n || plan.entries.cols() != n)
    throw DimensionMismatch("unscale_plan: plan must be n x n");
  auto is_ones = [&](const Vector& v) {
    return v.size() == n && (v.array() - 1.0).abs().maxCoeff() <= 1e-12;
  };
  if (!is_ones(plan.row_marginal) || !is_ones(plan.col_marginal))
    throw NonUniformMarginals("unscale_plan: marginals are not all ones");
  TransportPlan out;
  out.entries = plan.entries / static_cast<double>(n);
  out.row_marginal = Vector::Constant(n, 1.0 / n);
  out.col_marginal = Vector::Constant(n, 1.0 / n);
  return out;
}

double entropic_objective(const Matrix& C, const Matrix& S, double epsilon) {
  if (C.rows() != S.rows() || C.cols() != S.cols())
    throw DimensionMismatch("entropic_objective: shape mismatch");
  double cost = 0.0, ent = 0.0;
  for (int j = 0; j < S.cols(); ++j) {
    for (int i = 0; i < S.rows(); ++i) {
      const double s = S(i, j);
      cost += C(i, j) * s;
      if (s > 0.0) ent += s * std::log(s);
    }
  }
  return cost + epsilon * ent;
}

double assignment_cost(const Matrix& C, const std::vector<int>& perm) {
  double cost = 0.0;
  for (int i = 0; i < static_cast<int>(perm.size()); ++i) cost += C(i, perm[i]);
  return cost;
}

Assignment assignment_bruteforce(const Matrix& C) {
  const int n = static_cast<int>(C.rows());
  if (C.cols() != n) throw DimensionMismatch("assignment_bruteforce: matrix must be square");
  if (n > 9) throw TooLarge("assignment_bruteforce: n > 9");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Assignment best{perm, assignment_cost(C, perm)};
  // next_permutation walks permutations in lexicographic order, so keeping
  // strictly better candidates leaves the lexicographically smallest optimum.
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double cost = assignment_cost(C, perm);
    if (cost < best.cost) best = Assignment{perm, cost};
  }
  return best;
}

Assignment assignment_lp(const Matrix& C) {
  const int n = static_cast<int>(C.rows());
  if (C.cols() != n) throw DimensionMismatch("assignment_lp: matrix must be square");
  // Shortest augmenting paths with dual potentials; 1-based with column 0 as
  // the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = C(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  Assignment out;
  out.perm.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.perm[match[j] - 1] = j - 1;
  out.cost = assignment_cost(C, out.perm);
  return out;
}

std::vector<int> round_to_permutation(const Matrix& S) {
  const int n = static_cast<int>(S.rows());
  if (S.cols() != n) throw DimensionMismatch("round_to_permutation: matrix must be square");
  std::vector<int> perm(n, -1);
  std::vector<char> row_done(n, 0), col_done(n, 0);
  for (int step = 0; step < n; ++step) {
    double best = -kInf;
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (row_done[i]) continue;
      for (int j = 0; j < n; ++j) {
        if (col_done[j]) continue;
        if (S(i, j) > best) {  // strict: ties keep the first row-major hit
          best = S(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    perm[bi] = bj;
    row_done[bi] = 1;
    col_done[bj] = 1;
  }
  return perm;
}

}  // namespace otreg
