#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "otreg/models.hpp"
#include "otreg/robust.hpp"
#include "otreg/types.hpp"

namespace otreg {

enum class InitKind { Zeros, RandomNormal, FromRS, Explicit };

struct TrainConfig {
  double learning_rate = 1e-4;
  int iters = 2000;
  int batch_size = 500;
  double epsilon = 1e-4;  // lower-problem entropy weight
  std::uint64_t seed = 0;
  InitKind init = InitKind::Zeros;
  Vector init_w;  // used with InitKind::Explicit

  // RANSAC settings (rs_train and the FromRS initializer).
  int rs_iters = 200000;
  double inlier_tol = 1e-2;
  int rs_multistart = 10;

  // Inner solver settings for the bilevel trainers.
  double sinkhorn_tol = 1e-8;
  int sinkhorn_max_iters = 20000;

  bool recover_perm = false;   // round the final full-data plan (n == m only)
  bool am_exact_ls = false;    // AM: exact least-squares w-step (linear model)
};

struct TrainReport {
  ModelParams final_params;
  std::vector<double> objective_trace;  // one entry per iteration
  double wall_time_s = 0.0;
  std::optional<std::vector<int>> recovered_perm;
};

/// Hypergradient descent on <C(w), S_eps(w)> with the entropic plan as the
/// lower problem. Each iteration draws an equal-size row batch from D1 and
/// D2, solves the batch transport problem, and steps along the exact
/// hypergradient.
TrainReport robot_train(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg);

/// Same loop with the relaxed-marginal solver and its hypergradient;
/// supports unequal dataset sizes.
TrainReport robot_robust_train(const ShuffledDataset& data, ModelKind kind,
                               const TrainConfig& cfg, const RobustConfig& rcfg);

/// Alternating minimization: exact assignment on the batch cost, then one
/// gradient step (optionally exact least squares) on the matched pairs.
TrainReport am_train(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg);

/// Gradient-descent regression pairing D1 and D2 rows by index.
TrainReport least_squares_train(const ShuffledDataset& data, ModelKind kind,
                                const TrainConfig& cfg);

/// Gradient-descent regression on the ground-truth pairing.
TrainReport oracle_train(const ShuffledDataset& data, ModelKind kind, const TrainConfig& cfg);

/// RANSAC for the linear model: repeatedly fit w on a minimal index-paired
/// sample, score by best-match inliers, refit on the winning inlier set.
/// The objective trace records -best_inlier_count per trial.
TrainReport rs_train(const ShuffledDataset& data, const TrainConfig& cfg, int rs_iters,
                     double inlier_tol);

/// Closed-form condition numbers of the alternating and reduced (bilevel)
/// Hessians for the coupled quadratic with P = rho 11^T + (1-rho) I.
/// Requires d1, d2 >= 2 so both extreme eigenvalues are present.
std::pair<double, double> condition_numbers(int d1, int d2, double rho, double lambda);

/// Same quantities from explicitly assembled Hessians and a dense
/// eigensolve.
std::pair<double, double> condition_numbers_numeric(int d1, int d2, double rho, double lambda);

}  // namespace otreg
