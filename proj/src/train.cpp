#include "otreg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "otreg/hypergrad.hpp"
#include "otreg/ot.hpp"
#include "otreg/rng.hpp"

namespace otreg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// RNG stream ids within a training run.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kRsStream = 3;

ShuffledDataset take_batch(const ShuffledDataset& data, const std::vector<int>& rows,
                           const std::vector<int>& cols) {
  ShuffledDataset b;
  b.x.resize(rows.size(), data.d());
  b.y.resize(rows.size());
  b.z.resize(cols.size(), data.e());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.x.row(i) = data.x.row(rows[i]);
    b.y[i] = data.y[rows[i]];
  }
  for (std::size_t j = 0; j < cols.size(); ++j) b.z.row(j) = data.z.row(cols[j]);
  return b;
}

std::vector<int> identity_indices(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

Vector initial_params(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg,
                      Rng& rng) {
  const int p = data.d() + data.e();
  switch (cfg.init) {
    case InitKind::Zeros:
      return Vector::Zero(p);
    case InitKind::RandomNormal:
      return rng.normal_vector(p);
    case InitKind::Explicit:
      if (cfg.init_w.size() != p)
        throw DimensionMismatch("train: explicit init has wrong length");
      return cfg.init_w;
    case InitKind::FromRS: {
      if (kind != ModelKind::Linear)
        throw std::invalid_argument("train: FromRS init requires the linear model");
      TrainConfig rs_cfg = cfg;
      double best = std::numeric_limits<double>::infinity();
      Vector best_w = Vector::Zero(p);
      for (int k = 0; k < cfg.rs_multistart; ++k) {
        rs_cfg.seed = Rng(cfg.seed).stream(kRsStream + k).next_u64();
        const TrainReport rep = rs_train(data, rs_cfg, cfg.rs_iters, cfg.inlier_tol);
        // trace holds -best_inlier_count; smaller is better
        const double score = rep.objective_trace.empty() ? 0.0 : rep.objective_trace.back();
        if (score < best) {
          best = score;
          best_w = rep.final_params.w;
        }
      }
      return best_w;
    }
  }
  return Vector::Zero(p);
}

TrainReport paired_descent(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg,
                           const std::vector<int>& pairing) {
  const auto t0 = Clock::now();
  data.validate();
  Rng rng = Rng(cfg.seed).stream(kInitStream);
  ModelParams params{initial_params(data, kind, cfg, rng), kind};
  TrainReport rep;
  rep.objective_trace.reserve(cfg.iters);
  for (int t = 0; t < cfg.iters; ++t) {
    rep.objective_trace.push_back(paired_residual(params, data, pairing));
    params.w -= cfg.learning_rate * paired_residual_gradient(params, data, pairing);
  }
  rep.final_params = params;
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

}  // namespace

TrainReport robot_train(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg) {
  const auto t0 = Clock::now();
  data.validate();
  const int n = data.n(), m = data.m();
  const int B = std::min(cfg.batch_size, std::min(n, m));
  if (B <= 0) throw std::invalid_argument("robot_train: empty batch");
  Rng init_rng = Rng(cfg.seed).stream(kInitStream);
  Rng batch_rng = Rng(cfg.seed).stream(kBatchStream);
  ModelParams params{initial_params(data, kind, cfg, init_rng), kind};

  SinkhornConfig scfg{cfg.epsilon, cfg.sinkhorn_max_iters, cfg.sinkhorn_tol};
  const Vector marg = Vector::Constant(B, 1.0 / B);
  const bool full_batch = (B == n && B == m);
  SinkhornSolution last_sol;
  bool have_warm = false;

  TrainReport rep;
  rep.objective_trace.reserve(cfg.iters);
  for (int t = 0; t < cfg.iters; ++t) {
    const std::vector<int> rows =
        full_batch ? identity_indices(n) : batch_rng.sample_without_replacement(n, B);
    const std::vector<int> cols =
        full_batch ? identity_indices(m) : batch_rng.sample_without_replacement(m, B);
    const ShuffledDataset batch = take_batch(data, rows, cols);
    const Matrix C = cost_matrix(params, batch);
    const SinkhornSolution sol = sinkhorn_solve(
        C, marg, marg, scfg, full_batch && have_warm ? &last_sol.duals : nullptr);
    rep.objective_trace.push_back(B * C.cwiseProduct(sol.plan.entries).sum());
    const ModelCostGradient grad = cost_matrix_grad(params, batch);
    params.w -= cfg.learning_rate * exact_hypergradient(C, grad, sol, cfg.epsilon);
    if (full_batch) {
      last_sol = sol;
      have_warm = true;
    }
  }
  rep.final_params = params;
  if (cfg.recover_perm && n == m) {
    const Matrix C = cost_matrix(params, data);
    const Vector full_marg = Vector::Constant(n, 1.0 / n);
    const SinkhornSolution sol = sinkhorn_solve(C, full_marg, full_marg, scfg);
    rep.recovered_perm = round_to_permutation(sol.plan.entries);
  }
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

TrainReport robot_robust_train(const ShuffledDataset& data, ModelKind kind,
                               const TrainConfig& cfg, const RobustConfig& rcfg) {
  const auto t0 = Clock::now();
  data.validate();
  rcfg.validate();
  const int n = data.n(), m = data.m();
  const int Br = std::min(cfg.batch_size, n);
  const int Bc = std::min(cfg.batch_size, m);
  Rng init_rng = Rng(cfg.seed).stream(kInitStream);
  Rng batch_rng = Rng(cfg.seed).stream(kBatchStream);
  ModelParams params{initial_params(data, kind, cfg, init_rng), kind};

  RobustConfig inner = rcfg;
  inner.epsilon = cfg.epsilon;
  const Vector mu = Vector::Constant(Br, 1.0 / Br);
  const Vector nu = Vector::Constant(Bc, 1.0 / Bc);
  const bool full_batch = (Br == n && Bc == m);

  TrainReport rep;
  rep.objective_trace.reserve(cfg.iters);
  for (int t = 0; t < cfg.iters; ++t) {
    const std::vector<int> rows =
        full_batch ? identity_indices(n) : batch_rng.sample_without_replacement(n, Br);
    const std::vector<int> cols =
        full_batch ? identity_indices(m) : batch_rng.sample_without_replacement(m, Bc);
    const ShuffledDataset batch = take_batch(data, rows, cols);
    const Matrix C = cost_matrix(params, batch);
    const RobustSolution sol = robust_solve(C, mu, nu, inner);
    rep.objective_trace.push_back(Br * C.cwiseProduct(sol.plan.entries).sum());
    const ModelCostGradient grad = cost_matrix_grad(params, batch);
    params.w -= cfg.learning_rate * robust_hypergradient(C, grad, sol, inner);
  }
  rep.final_params = params;
  if (cfg.recover_perm && n == m) {
    const Matrix C = cost_matrix(params, data);
    const Vector full_marg = Vector::Constant(n, 1.0 / n);
    RobustConfig full_cfg = inner;
    const RobustSolution sol = robust_solve(C, full_marg, full_marg, full_cfg);
    rep.recovered_perm = round_to_permutation(sol.plan.entries);
  }
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

TrainReport am_train(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg) {
  const auto t0 = Clock::now();
  data.validate();
  const int n = data.n(), m = data.m();
  if (n != m) throw DimensionMismatch("am_train: requires n == m");
  const int B = std::min(cfg.batch_size, n);
  Rng init_rng = Rng(cfg.seed).stream(kInitStream);
  Rng batch_rng = Rng(cfg.seed).stream(kBatchStream);
  ModelParams params{initial_params(data, kind, cfg, init_rng), kind};
  const bool full_batch = (B == n);

  TrainReport rep;
  rep.objective_trace.reserve(cfg.iters);
  for (int t = 0; t < cfg.iters; ++t) {
    const std::vector<int> rows =
        full_batch ? identity_indices(n) : batch_rng.sample_without_replacement(n, B);
    const std::vector<int> cols =
        full_batch ? identity_indices(m) : batch_rng.sample_without_replacement(m, B);
    const ShuffledDataset batch = take_batch(data, rows, cols);
    const Matrix C = cost_matrix(params, batch);
    const Assignment a = assignment_lp(C);
    rep.objective_trace.push_back(a.cost);
    if (cfg.am_exact_ls && kind == ModelKind::Linear) {
      // Exact least squares on the matched pairs.
      const int p = batch.d() + batch.e();
      Matrix design(B, p);
      for (int i = 0; i < B; ++i) {
        design.row(i).head(batch.d()) = batch.x.row(i);
        design.row(i).tail(batch.e()) = batch.z.row(a.perm[i]);
      }
      const Matrix gram = design.transpose() * design;
      const Eigen::LDLT<Matrix> ldlt(gram);
      if (ldlt.info() == Eigen::Success)
        params.w = ldlt.solve(design.transpose() * batch.y);
    } else {
      params.w -= cfg.learning_rate * paired_residual_gradient(params, batch, a.perm);
    }
  }
  rep.final_params = params;
  if (cfg.recover_perm) {
    const Matrix C = cost_matrix(params, data);
    rep.recovered_perm = assignment_lp(C).perm;
  }
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

TrainReport least_squares_train(const ShuffledDataset& data, ModelKind kind,
                                const TrainConfig& cfg) {
  if (data.n() != data.m())
    throw DimensionMismatch("least_squares_train: requires n == m to pair by index");
  return paired_descent(data, kind, cfg, identity_indices(data.n()));
}

TrainReport oracle_train(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg) {
  if (!data.true_perm)
    throw MissingGroundTruth("oracle_train: dataset carries no ground-truth correspondence");
  return paired_descent(data, kind, cfg, *data.true_perm);
}

namespace {

// One-to-one inlier score for a candidate w: couple the x-adjusted labels
// with the z predictions in sorted order (the optimal 1D matching) and count
// couples within the tolerance. A per-(i,j) nearest-match count saturates on
// large noisy instances because unrelated predictions land close to any
// label by chance; the bijective coupling removes that failure mode.
struct RansacMatch {
  int inliers = 0;
  std::vector<std::pair<int, int>> pairs;  // (row of D1, row of D2), inliers only
};

RansacMatch coupled_inliers(const ShuffledDataset& data, const Vector& w, double tol,
                            bool keep_pairs) {
  const int n = data.n(), d = data.d(), e = data.e();
  std::vector<std::pair<double, int>> lhs(n), rhs(n);
  for (int i = 0; i < n; ++i)
    lhs[i] = {data.y[i] - data.x.row(i).dot(w.head(d)), i};
  for (int j = 0; j < n; ++j) rhs[j] = {data.z.row(j).dot(w.tail(e)), j};
  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());
  RansacMatch match;
  for (int k = 0; k < n; ++k) {
    if (std::abs(lhs[k].first - rhs[k].first) <= tol) {
      ++match.inliers;
      if (keep_pairs) match.pairs.emplace_back(lhs[k].second, rhs[k].second);
    }
  }
  return match;
}

}  // namespace

TrainReport rs_train(const ShuffledDataset& data, const TrainConfig& cfg, int rs_iters,
                     double inlier_tol) {
  const auto t0 = Clock::now();
  data.validate();
  if (rs_iters <= 0) throw InsufficientIterations("rs_train: rs_iters must be positive");
  if (data.n() != data.m()) throw DimensionMismatch("rs_train: requires n == m");
  const int n = data.n(), d = data.d(), e = data.e(), p = d + e;
  if (n < p) throw DimensionMismatch("rs_train: need at least d + e rows");
  Rng rng = Rng(cfg.seed).stream(kRsStream);

  Vector best_w = Vector::Zero(p);
  int best_count = -1;
  TrainReport rep;
  rep.objective_trace.reserve(rs_iters);
  Matrix sys(p, p);
  Vector rhs(p);
  for (int trial = 0; trial < rs_iters; ++trial) {
    const std::vector<int> idx = rng.sample_without_replacement(n, p);
    for (int r = 0; r < p; ++r) {
      sys.row(r).head(d) = data.x.row(idx[r]);
      sys.row(r).tail(e) = data.z.row(idx[r]);
      rhs[r] = data.y[idx[r]];
    }
    const Eigen::PartialPivLU<Matrix> lu(sys);
    const double dmin = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (dmin < 1e-12 * std::max(1.0, sys.cwiseAbs().maxCoeff())) {
      rep.objective_trace.push_back(-best_count);  // singular sample skipped
      continue;
    }
    const Vector w = lu.solve(rhs);
    const int count = coupled_inliers(data, w, inlier_tol, false).inliers;
    if (count > best_count) {
      best_count = count;
      best_w = w;
    }
    rep.objective_trace.push_back(-best_count);
  }

  // Refit on the winning coupled inlier pairs.
  const RansacMatch match = coupled_inliers(data, best_w, inlier_tol, true);
  if (static_cast<int>(match.pairs.size()) >= p) {
    Matrix design(match.pairs.size(), p);
    Vector ry(match.pairs.size());
    for (std::size_t r = 0; r < match.pairs.size(); ++r) {
      const auto [i, j] = match.pairs[r];
      design.row(r).head(d) = data.x.row(i);
      design.row(r).tail(e) = data.z.row(j);
      ry[r] = data.y[i];
    }
    const Matrix gram = design.transpose() * design;
    const Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() == Eigen::Success) {
      const Vector refit = ldlt.solve(design.transpose() * ry);
      if (refit.allFinite()) best_w = refit;
    }
  }

  rep.final_params = ModelParams{best_w, ModelKind::Linear};
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

std::pair<double, double> condition_numbers(int d1, int d2, double rho, double lambda) {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidRho("condition_numbers: rho must be in (0,1)");
  if (d1 < 2 || d2 < 1 || lambda < 0.0)
    throw std::invalid_argument("condition_numbers: need d1 >= 2, d2 >= 1, lambda >= 0");
  const double c_am = 1.0 + d1 * rho / (1.0 - rho);
  const double c_robot =
      1.0 + (1.0 - rho + lambda) / (d2 * rho - rho + lambda + 1.0) * d1 * rho / (1.0 - rho);
  return {c_am, c_robot};
}

std::pair<double, double> condition_numbers_numeric(int d1, int d2, double rho, double lambda) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidRho("condition_numbers_numeric: rho must be in (0,1)");
  const int d = d1 + d2;
  const Matrix P = rho * Matrix::Ones(d, d) + (1.0 - rho) * Matrix::Identity(d, d);
  const Matrix P11 = P.topLeftCorner(d1, d1);
  const Matrix P12 = P.topRightCorner(d1, d2);
  const Matrix P22 = P.bottomRightCorner(d2, d2);
  const Matrix reg = P22 + lambda * Matrix::Identity(d2, d2);
  const Matrix h_robot = P11 - P12 * reg.ldlt().solve(P12.transpose());

  auto cond = [](const Matrix& H) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const Vector ev = es.eigenvalues();
    return ev.maxCoeff() / ev.minCoeff();
  };
  return {cond(P11), cond(h_robot)};
}

}  // namespace otreg
