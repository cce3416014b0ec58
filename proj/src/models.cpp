#include "otreg/models.hpp"

#include <cmath>

namespace otreg {

namespace {

// Both model kinds split over the concatenation: f(x, z; w) = fx(x) + fz(z).
double half_linear(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& w) {
  return v.dot(w);
}

double half_sine(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& w) {
  double s = 0.0;
  for (int k = 0; k < v.size(); ++k) s += std::sin(v[k] * w[k]);
  return s;
}

double half_predict(ModelKind kind, const Eigen::Ref<const Vector>& v,
                    const Eigen::Ref<const Vector>& w) {
  return kind == ModelKind::Linear ? half_linear(v, w) : half_sine(v, w);
}

}  // namespace

void ShuffledDataset::validate() const {
  if (x.rows() != y.size())
    throw DimensionMismatch("dataset: x and y row counts differ");
  if (!x.allFinite() || !y.allFinite() || !z.allFinite())
    throw NonFinite("dataset: non-finite entries");
  if (true_perm) {
    if (n() != m()) throw DimensionMismatch("dataset: true_perm requires n == m");
    if (static_cast<int>(true_perm->size()) != n())
      throw DimensionMismatch("dataset: true_perm length mismatch");
  }
}

double predict(const ModelParams& params, const Eigen::Ref<const Vector>& xrow,
               const Eigen::Ref<const Vector>& zrow) {
  const int d = static_cast<int>(xrow.size());
  const int e = static_cast<int>(zrow.size());
  if (params.w.size() != d + e)
    throw DimensionMismatch("predict: w must have length d + e");
  return half_predict(params.kind, xrow, params.w.head(d)) +
         half_predict(params.kind, zrow, params.w.tail(e));
}

Matrix cost_matrix(const ModelParams& params, const ShuffledDataset& data) {
  data.validate();
  const int n = data.n(), m = data.m(), d = data.d(), e = data.e();
  if (params.w.size() != d + e)
    throw DimensionMismatch("cost_matrix: w must have length d + e");
  Vector fx(n), fz(m);
  for (int i = 0; i < n; ++i) fx[i] = half_predict(params.kind, data.x.row(i), params.w.head(d));
  for (int j = 0; j < m; ++j) fz[j] = half_predict(params.kind, data.z.row(j), params.w.tail(e));
  Matrix C(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) {
      const double r = data.y[i] - fx[i] - fz[j];
      C(i, j) = r * r;
    }
  return C;
}

ModelCostGradient::ModelCostGradient(const ModelParams& params, const ShuffledDataset& data)
    : kind_(params.kind), w_(params.w), x_(data.x), z_(data.z), y_(data.y) {
  data.validate();
  const int d = data.d(), e = data.e();
  if (w_.size() != d + e)
    throw DimensionMismatch("cost_matrix_grad: w must have length d + e");
  fx_.resize(data.n());
  fz_.resize(data.m());
  for (int i = 0; i < data.n(); ++i)
    fx_[i] = half_predict(kind_, x_.row(i), w_.head(d));
  for (int j = 0; j < data.m(); ++j)
    fz_[j] = half_predict(kind_, z_.row(j), w_.tail(e));
}

Vector ModelCostGradient::contract(const Matrix& A) const {
  const int n = static_cast<int>(y_.size());
  const int m = static_cast<int>(z_.rows());
  const int d = static_cast<int>(x_.cols());
  const int e = static_cast<int>(z_.cols());
  if (A.rows() != n || A.cols() != m)
    throw DimensionMismatch("contract: weight matrix shape mismatch");

  // dC_ij/dw = -2 (y_i - fx_i - fz_j) * df_ij/dw and df splits over [x, z],
  // so only row/column aggregates of B = -2 r .* A are needed.
  const Vector arow = A.rowwise().sum();                  // n
  const Vector acol = A.colwise().sum().transpose();      // m
  const Vector ry = y_ - fx_;                             // residual minus fz_j
  const Vector brow = -2.0 * (ry.cwiseProduct(arow) - A * fz_);
  const Vector bcol = -2.0 * (A.transpose() * ry - fz_.cwiseProduct(acol));

  Vector g = Vector::Zero(d + e);
  if (kind_ == ModelKind::Linear) {
    if (d > 0) g.head(d) = x_.transpose() * brow;
    if (e > 0) g.tail(e) = z_.transpose() * bcol;
  } else {
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += x_(i, k) * std::cos(x_(i, k) * w_[k]) * brow[i];
      g[k] = s;
    }
    for (int k = 0; k < e; ++k) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += z_(j, k) * std::cos(z_(j, k) * w_[d + k]) * bcol[j];
      g[d + k] = s;
    }
  }
  return g;
}

ModelCostGradient cost_matrix_grad(const ModelParams& params, const ShuffledDataset& data) {
  return ModelCostGradient(params, data);
}

double relative_error(const ModelParams& params, const ShuffledDataset& test) {
  test.validate();
  if (test.n() != test.m())
    throw DimensionMismatch("relative_error: test set must pair rows one-to-one");
  const double ybar = test.y.mean();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < test.n(); ++i) {
    const double yhat = predict(params, test.x.row(i), test.z.row(i));
    num += (yhat - test.y[i]) * (yhat - test.y[i]);
    den += (test.y[i] - ybar) * (test.y[i] - ybar);
  }
  if (den <= 0.0) throw DegenerateLabels("relative_error: labels have zero variance");
  return num / den;
}

double paired_residual(const ModelParams& params, const ShuffledDataset& data,
                       const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != data.n())
    throw DimensionMismatch("paired_residual: permutation length mismatch");
  double s = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double r = data.y[i] - predict(params, data.x.row(i), data.z.row(perm[i]));
    s += r * r;
  }
  return s;
}

Vector paired_residual_gradient(const ModelParams& params, const ShuffledDataset& data,
                                const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != data.n())
    throw DimensionMismatch("paired_residual_gradient: permutation length mismatch");
  const int d = data.d(), e = data.e();
  if (params.w.size() != d + e)
    throw DimensionMismatch("paired_residual_gradient: w must have length d + e");
  Vector g = Vector::Zero(d + e);
  for (int i = 0; i < data.n(); ++i) {
    const auto xrow = data.x.row(i);
    const auto zrow = data.z.row(perm[i]);
    const double r = data.y[i] - predict(params, xrow, zrow);
    const double c = -2.0 * r;
    if (params.kind == ModelKind::Linear) {
      g.head(d) += c * xrow.transpose();
      g.tail(e) += c * zrow.transpose();
    } else {
      for (int k = 0; k < d; ++k) g[k] += c * xrow[k] * std::cos(xrow[k] * params.w[k]);
      for (int k = 0; k < e; ++k)
        g[d + k] += c * zrow[k] * std::cos(zrow[k] * params.w[d + k]);
    }
  }
  return g;
}

}  // namespace otreg
