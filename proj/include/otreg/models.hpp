#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "otreg/types.hpp"

namespace otreg {

enum class ModelKind { Linear, Sine };

/// Regression parameters over the concatenated input [x, z], so
/// w.size() == d + e for both model kinds.
struct ModelParams {
  Vector w;
  ModelKind kind = ModelKind::Linear;
};

/// Two unaligned collections: D1 = {(x_i, y_i)} and D2 = {z_j}. When the
/// generating permutation is known (evaluation only), true_perm[i] is the
/// row of z that corresponds to y_i; it requires n == m.
struct ShuffledDataset {
  Matrix x;  // n x d, d may be zero
  Vector y;  // n
  Matrix z;  // m x e
  std::optional<std::vector<int>> true_perm;

  int n() const { return static_cast<int>(y.size()); }
  int m() const { return static_cast<int>(z.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
  int e() const { return static_cast<int>(z.cols()); }

  void validate() const;
};

double predict(const ModelParams& params, const Eigen::Ref<const Vector>& xrow,
               const Eigen::Ref<const Vector>& zrow);

/// C_ij = (y_i - f(x_i, z_j; w))^2.
Matrix cost_matrix(const ModelParams& params, const ShuffledDataset& data);

/// Weighted sums of per-entry cost gradients without materializing the
/// (n, m, p) tensor: contract(A) = sum_ij A_ij * dC_ij/dw.
class CostGradient {
 public:
  virtual ~CostGradient() = default;
  virtual Vector contract(const Matrix& A) const = 0;
  virtual int dim() const = 0;
};

class ModelCostGradient final : public CostGradient {
 public:
  ModelCostGradient(const ModelParams& params, const ShuffledDataset& data);
  Vector contract(const Matrix& A) const override;
  int dim() const override { return static_cast<int>(w_.size()); }

 private:
  ModelKind kind_;
  Vector w_;
  Matrix x_, z_;
  Vector y_;
  Vector fx_, fz_;  // separable halves of the prediction
};

ModelCostGradient cost_matrix_grad(const ModelParams& params, const ShuffledDataset& data);

/// sum_i (yhat_i - y_i)^2 / sum_i (y_i - ybar)^2 on an identity-aligned
/// test set.
double relative_error(const ModelParams& params, const ShuffledDataset& test);

/// Sum of squared residuals under a fixed row->column correspondence.
double paired_residual(const ModelParams& params, const ShuffledDataset& data,
                       const std::vector<int>& perm);

/// Gradient of paired_residual in w, computed pairwise (no plan matrix).
Vector paired_residual_gradient(const ModelParams& params, const ShuffledDataset& data,
                                const std::vector<int>& perm);

}  // namespace otreg
