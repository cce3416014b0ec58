#include "otreg/hypergrad.hpp"

#include <cmath>

#include "otreg/memlog.hpp"

namespace otreg {

Vector ImplicitSystem::solve(const Vector& alpha, const Vector& beta_bar) const {
  const int n = static_cast<int>(alpha.size());
  const int mb = static_cast<int>(beta_bar.size());
  Vector t(n + mb);
  const Vector da = inv_mu.cwiseProduct(alpha);
  if (mb == 0) {
    t = da;
    return t;
  }
  const Vector s = gbar.transpose() * da - beta_bar;
  Vector y = kmat_llt.solve(s);
  y += kmat_llt.solve(s - kmat * y);  // one refinement step
  t.head(n) = inv_mu.cwiseProduct(alpha + gbar * y);
  t.tail(mb) = -y;
  return t;
}

ImplicitSystem build_implicit_system(const Matrix& plan, const Vector& mu, const Vector& nu) {
  const int n = static_cast<int>(plan.rows());
  const int m = static_cast<int>(plan.cols());
  if (mu.size() != n || nu.size() != m)
    throw DimensionMismatch("build_implicit_system: marginal sizes mismatch");
  ImplicitSystem sys;
  sys.inv_mu = mu.cwiseInverse();
  if (!sys.inv_mu.allFinite())
    throw SingularSystem("build_implicit_system: zero row marginal");
  sys.gbar = plan.leftCols(m - 1);
  memlog::note_alloc(sizeof(double) * static_cast<std::size_t>(n) * (m - 1));
  sys.kmat = Matrix(nu.head(m - 1).asDiagonal());
  sys.kmat.noalias() -= sys.gbar.transpose() * sys.inv_mu.asDiagonal() * sys.gbar;
  memlog::note_alloc(sizeof(double) * static_cast<std::size_t>(m - 1) * (m - 1));
  if (m > 1) {
    sys.kmat_llt.compute(sys.kmat);
    // Sharply concentrated plans round the Schur complement to semidefinite;
    // regularize at the marginal scale. The affected modes are exactly those
    // the plan entries suppress in the final product.
    double ridge = 1e-10 * nu.head(m - 1).maxCoeff();
    for (int attempt = 0; sys.kmat_llt.info() != Eigen::Success && attempt < 5; ++attempt) {
      Matrix ridged = sys.kmat;
      ridged.diagonal().array() += ridge;
      sys.kmat_llt.compute(ridged);
      ridge *= 100.0;
    }
    if (sys.kmat_llt.info() != Eigen::Success)
      throw SingularSystem("build_implicit_system: Schur complement not positive definite");
  }
  return sys;
}

Matrix exact_hypergradient_weights(const Matrix& C, const SinkhornSolution& sol,
                                   double epsilon) {
  if (!sol.converged)
    throw NotConverged("exact_hypergradient: solution did not converge");
  const Matrix& gamma = sol.plan.entries;
  const int n = static_cast<int>(gamma.rows());
  const int m = static_cast<int>(gamma.cols());
  if (C.rows() != n || C.cols() != m)
    throw DimensionMismatch("exact_hypergradient: cost/plan shape mismatch");

  const ImplicitSystem sys =
      build_implicit_system(gamma, sol.plan.row_marginal, sol.plan.col_marginal);
  const Matrix cg = C.cwiseProduct(gamma);
  memlog::note_alloc(sizeof(double) * static_cast<std::size_t>(n) * m);
  const Vector alpha = cg.rowwise().sum();
  const Vector beta_bar = cg.colwise().sum().head(m - 1);
  const Vector t = sys.solve(alpha, beta_bar);

  Matrix g(n, m);
  for (int j = 0; j < m; ++j) {
    const double tz = j < m - 1 ? t[n + j] : 0.0;
    for (int i = 0; i < n; ++i)
      g(i, j) = gamma(i, j) * (1.0 + (t[i] + tz - C(i, j)) / epsilon);
  }
  g *= static_cast<double>(n);
  memlog::note_free(sizeof(double) * static_cast<std::size_t>(n) * (2 * m - 1));
  memlog::note_free(sizeof(double) * static_cast<std::size_t>(m - 1) * (m - 1));
  return g;
}

Vector exact_hypergradient(const Matrix& C, const CostGradient& grad_c,
                           const SinkhornSolution& sol, double epsilon) {
  return grad_c.contract(exact_hypergradient_weights(C, sol, epsilon));
}

std::pair<double, double> estimate_marginal_multipliers(const Vector& dual, const Vector& moved,
                                                        const Vector& base,
                                                        double entropy_weight) {
  const int n = static_cast<int>(dual.size());
  const int h = (n + 1) / 2;
  Vector r(n);
  for (int i = 0; i < n; ++i)
    r[i] = -dual[i] - entropy_weight * std::log(std::max(moved[i], 1e-300));
  const Vector d = moved - base;
  const double x1 = d.head(h).sum();
  const double x2 = d.tail(n - h).sum();
  const double b1 = r.head(h).sum();
  const double b2 = r.tail(n - h).sum();
  const double det = h * 2.0 * x2 - (n - h) * 2.0 * x1;
  const double scale = std::max({1.0, std::abs(x1), std::abs(x2)}) * n;
  if (std::abs(det) < 1e-10 * scale) {
    // moved == base up to rounding: ball constraint inactive.
    return {r.mean(), 0.0};
  }
  const double lam1 = (b1 * 2.0 * x2 - 2.0 * x1 * b2) / det;
  const double lam3 = (h * b2 - (n - h) * b1) / det;
  return {lam1, lam3};
}

Matrix robust_hypergradient_weights(const Matrix& C, const RobustSolution& sol,
                                    const RobustConfig& cfg) {
  if (!sol.converged)
    throw NotConverged("robust_hypergradient: solution did not converge");
  const Matrix& S = sol.plan.entries;
  const int n = static_cast<int>(S.rows());
  const int m = static_cast<int>(S.cols());
  if (C.rows() != n || C.cols() != m)
    throw DimensionMismatch("robust_hypergradient: cost/plan shape mismatch");
  const double eps = cfg.epsilon;

  const bool pin_mu = cfg.rho1 == 0.0;
  const bool pin_nu = cfg.rho2 == 0.0;

  const Matrix cs = C.cwiseProduct(S);
  const Vector alpha = cs.rowwise().sum();
  const Vector beta = cs.colwise().sum();

  const int nx = n + m - 1;
  Vector u(nx);

  if (pin_mu && pin_nu) {
    // Zero-radius balls fix the marginals; this is the fixed-marginal system
    // (times eps, matching the shared assembly below).
    const ImplicitSystem sys = build_implicit_system(S, sol.mu_bar, sol.nu_bar);
    u = eps * sys.solve(alpha, beta.head(m - 1));
  } else {
    // Eliminate the marginal block, then the multipliers, leaving one dense
    // solve of size n + m - 1. Diagonal curvature of the marginal
    // stationarity: 2*lambda_ball + entropy_weight / marginal.
    auto [lam1, lam3] = pin_mu
                            ? std::pair<double, double>{0.0, 0.0}
                            : estimate_marginal_multipliers(sol.duals.xi, sol.mu_bar, sol.mu,
                                                            cfg.epsilon1);
    auto [lam2, lam4] = pin_nu
                            ? std::pair<double, double>{0.0, 0.0}
                            : estimate_marginal_multipliers(sol.duals.zeta, sol.nu_bar, sol.nu,
                                                            cfg.epsilon2);
    (void)lam1;
    (void)lam2;
    Vector lmu = Vector::Zero(n), lnu = Vector::Zero(m);
    if (!pin_mu) {
      for (int i = 0; i < n; ++i) {
        const double curv = 2.0 * lam3 + cfg.epsilon1 / sol.mu_bar[i];
        if (!(curv > 0.0) || !std::isfinite(curv))
          throw SingularSystem("robust_hypergradient: degenerate row-marginal curvature");
        lmu[i] = 1.0 / curv;
      }
    }
    if (!pin_nu) {
      for (int j = 0; j < m; ++j) {
        const double curv = 2.0 * lam4 + cfg.epsilon2 / sol.nu_bar[j];
        if (!(curv > 0.0) || !std::isfinite(curv))
          throw SingularSystem("robust_hypergradient: degenerate column-marginal curvature");
        lnu[j] = 1.0 / curv;
      }
    }

    // Active multipliers: (affine, ball) per unpinned side.
    const Vector dmu = sol.mu_bar - sol.mu;
    const Vector dnu = sol.nu_bar - sol.nu;
    std::vector<int> act;  // 0: lam1, 1: lam2, 2: lam3, 3: lam4
    if (!pin_mu) {
      act.push_back(0);
      act.push_back(2);
    }
    if (!pin_nu) {
      act.push_back(1);
      act.push_back(3);
    }
    const int na = static_cast<int>(act.size());

    // B columns (stationarity wrt multipliers) andode C rows (constraint
    // derivatives wrt the marginals), both over y = [mu_bar; nu_bar].
    Matrix By = Matrix::Zero(n + m, na), Cy = Matrix::Zero(na, n + m);
    for (int a = 0; a < na; ++a) {
      switch (act[a]) {
        case 0:
          By.col(a).head(n).setOnes();
          Cy.row(a).head(n).setOnes();
          break;
        case 1:
          By.col(a).tail(m).setOnes();
          Cy.row(a).tail(m).setOnes();
          break;
        case 2:
          By.col(a).head(n) = 2.0 * dmu;
          Cy.row(a).head(n) = (2.0 * lam3 * dmu).transpose();
          break;
        case 3:
          By.col(a).tail(m) = 2.0 * dnu;
          Cy.row(a).tail(m) = (2.0 * lam4 * dnu).transpose();
          break;
      }
    }
    Matrix W = Matrix::Zero(na, na);
    for (int a = 0; a < na; ++a) {
      if (act[a] == 2) W(a, a) = dmu.squaredNorm() - cfg.rho1;
      if (act[a] == 3) W(a, a) = dnu.squaredNorm() - cfg.rho2;
    }
    Vector ly(n + m);
    ly.head(n) = lmu;
    ly.tail(m) = lnu;
    W.noalias() -= Cy * ly.asDiagonal() * By;

    // Trim the pinned dual column (last zeta) out of the y-aggregates.
    auto trim = [&](const Matrix& full) {
      Matrix out(nx, full.cols());
      out.topRows(n) = full.topRows(n);
      out.bottomRows(m - 1) = full.middleRows(n, m - 1);
      return out;
    };
    const Matrix bx = trim(ly.asDiagonal() * By);
    Matrix cx(na, nx);
    cx.leftCols(n) = Cy.leftCols(n) * lmu.asDiagonal();
    cx.rightCols(m - 1) =
        (Cy.rightCols(m) * lnu.asDiagonal()).leftCols(m - 1);

    Matrix E(nx, nx);
    memlog::note_alloc(sizeof(double) * static_cast<std::size_t>(nx) * nx);
    E.topLeftCorner(n, n) = Matrix(sol.mu_bar.asDiagonal()) / eps;
    E.topRightCorner(n, m - 1) = S.leftCols(m - 1) / eps;
    E.bottomLeftCorner(m - 1, n) = S.leftCols(m - 1).transpose() / eps;
    E.bottomRightCorner(m - 1, m - 1) = Matrix(sol.nu_bar.head(m - 1).asDiagonal()) / eps;
    for (int i = 0; i < n; ++i) E(i, i) += lmu[i];
    for (int j = 0; j < m - 1; ++j) E(n + j, n + j) += lnu[j];
    Eigen::PartialPivLU<Matrix> wlu(W);
    const double wmin = wlu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(wmin > 1e-14 * std::max(1.0, W.cwiseAbs().maxCoeff())))
      throw SingularSystem("robust_hypergradient: degenerate multiplier system");
    E.noalias() += bx * wlu.solve(cx);

    Vector rhs(nx);
    rhs.head(n) = alpha;
    rhs.tail(m - 1) = beta.head(m - 1);
    u = Eigen::PartialPivLU<Matrix>(E.transpose()).solve(rhs);
    memlog::note_free(sizeof(double) * static_cast<std::size_t>(nx) * nx);
  }

  Matrix g(n, m);
  for (int j = 0; j < m; ++j) {
    const double uz = j < m - 1 ? u[n + j] : 0.0;
    for (int i = 0; i < n; ++i)
      g(i, j) = S(i, j) * (1.0 + ((u[i] + uz) / eps - C(i, j)) / eps);
  }
  g *= static_cast<double>(n);
  return g;
}

Vector robust_hypergradient(const Matrix& C, const CostGradient& grad_c,
                            const RobustSolution& sol, const RobustConfig& cfg) {
  return grad_c.contract(robust_hypergradient_weights(C, sol, cfg));
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& objective,
                                  const Vector& w, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  Vector g(w.size());
  for (int k = 0; k < w.size(); ++k) {
    Vector wp = w, wm = w;
    wp[k] += h;
    wm[k] -= h;
    g[k] = (objective(wp) - objective(wm)) / (2.0 * h);
  }
  return g;
}

}  // namespace otreg
