#include "otreg/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "otreg/rng.hpp"

namespace otreg {

namespace {

Vector add_noise(const Vector& clean, double noise_var, Rng& rng) {
  const double sd = std::sqrt(noise_var);
  Vector out = clean;
  for (int i = 0; i < out.size(); ++i) out[i] += sd * rng.normal();
  return out;
}

}  // namespace

GeneratedData gen_unlabeled_sensing(int n, int e, double noise_var, double shuffle_frac,
                                    std::uint64_t seed, std::optional<double> snr) {
  if (n <= 0 || e <= 0) throw std::invalid_argument("gen_unlabeled_sensing: n, e must be positive");
  if (shuffle_frac < 0.0 || shuffle_frac > 1.0)
    throw std::invalid_argument("gen_unlabeled_sensing: shuffle_frac must be in [0,1]");
  Rng rng(seed);

  GeneratedData out;
  const Vector w = rng.normal_vector(e);
  out.true_params = ModelParams{w, ModelKind::Linear};
  out.noise_var = snr ? w.squaredNorm() / *snr : noise_var;

  const Matrix z = rng.normal_matrix(n, e);
  const Vector y = add_noise(z * w, out.noise_var, rng);

  // Permute a uniformly chosen subset of the z rows among themselves.
  const int k = static_cast<int>(std::lround(shuffle_frac * n));
  const std::vector<int> subset = rng.sample_without_replacement(n, k);
  const std::vector<int> sigma = rng.permutation(k);
  Matrix z_shuffled = z;
  std::vector<int> true_perm(n);
  for (int i = 0; i < n; ++i) true_perm[i] = i;
  for (int t = 0; t < k; ++t) {
    z_shuffled.row(subset[t]) = z.row(subset[sigma[t]]);
    true_perm[subset[sigma[t]]] = subset[t];  // y_{subset[sigma[t]]} now pairs row subset[t]
  }

  out.train.x.resize(n, 0);
  out.train.y = y;
  out.train.z = z_shuffled;
  out.train.true_perm = true_perm;

  const Matrix z_test = rng.normal_matrix(n, e);
  out.test.x.resize(n, 0);
  out.test.y = add_noise(z_test * w, out.noise_var, rng);
  out.test.z = z_test;
  std::vector<int> ident(n);
  for (int i = 0; i < n; ++i) ident[i] = i;
  out.test.true_perm = ident;
  return out;
}

GeneratedData gen_nonlinear(int n, int d, int e, double noise_var, std::uint64_t seed) {
  if (n <= 0 || d <= 0 || e <= 0)
    throw std::invalid_argument("gen_nonlinear: n, d, e must be positive");
  Rng rng(seed);

  GeneratedData out;
  const Matrix x = rng.normal_matrix(n, d);
  const Matrix z = rng.normal_matrix(n, e);
  const Vector w = rng.normal_vector(d + e);
  out.true_params = ModelParams{w, ModelKind::Sine};
  out.noise_var = noise_var;

  Vector y(n);
  for (int i = 0; i < n; ++i) {
    double f = 0.0;
    for (int k = 0; k < d; ++k) f += std::sin(x(i, k) * w[k]);
    for (int k = 0; k < e; ++k) f += std::sin(z(i, k) * w[d + k]);
    y[i] = f;
  }
  y = add_noise(y, noise_var, rng);

  const std::vector<int> sigma = rng.permutation(n);
  Matrix z_shuffled(n, e);
  for (int t = 0; t < n; ++t) z_shuffled.row(t) = z.row(sigma[t]);

  const int n_train = (n * 4) / 5;
  out.train.x = x.topRows(n_train);
  out.train.y = y.head(n_train);
  out.train.z = z_shuffled;  // both platforms keep all m = n rows

  const int n_test = n - n_train;
  out.test.x = x.bottomRows(n_test);
  out.test.y = y.tail(n_test);
  out.test.z = z.bottomRows(n_test);  // true partners, identity aligned
  std::vector<int> ident(n_test);
  for (int i = 0; i < n_test; ++i) ident[i] = i;
  out.test.true_perm = ident;
  return out;
}

void write_dataset_csv(const std::string& path, const ShuffledDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  out.precision(17);
  const int n = data.n(), m = data.m(), d = data.d(), e = data.e();
  for (int k = 0; k < d; ++k) out << "x" << k << ",";
  out << "y";
  for (int k = 0; k < e; ++k) out << ",z" << k;
  out << ",perm\n";
  const int rows = std::max(n, m);
  for (int i = 0; i < rows; ++i) {
    if (i < n) {
      for (int k = 0; k < d; ++k) out << data.x(i, k) << ",";
      out << data.y[i];
    } else {
      for (int k = 0; k < d; ++k) out << ",";
    }
    for (int k = 0; k < e; ++k) {
      out << ",";
      if (i < m) out << data.z(i, k);
    }
    out << ",";
    if (data.true_perm && i < n) out << (*data.true_perm)[i];
    out << "\n";
  }
}

ShuffledDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_dataset_csv: empty file");

  int d = 0, e = 0;
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) {
      if (col.rfind('x', 0) == 0) ++d;
      if (col.rfind('z', 0) == 0) ++e;
    }
  }

  std::vector<std::vector<double>> xrows;
  std::vector<double> yvals;
  std::vector<std::vector<double>> zrows;
  std::vector<int> perm;
  bool perm_complete = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(1 + d + e + 1);  // pad trailing empties

    const bool has_y = !cells[d].empty();
    if (has_y) {
      std::vector<double> xr(d);
      for (int k = 0; k < d; ++k) xr[k] = std::stod(cells[k]);
      xrows.push_back(std::move(xr));
      yvals.push_back(std::stod(cells[d]));
      const std::string& pcell = cells[1 + d + e];
      if (pcell.empty())
        perm_complete = false;
      else
        perm.push_back(std::stoi(pcell));
    }
    if (!cells[d + 1].empty()) {
      std::vector<double> zr(e);
      for (int k = 0; k < e; ++k) zr[k] = std::stod(cells[d + 1 + k]);
      zrows.push_back(std::move(zr));
    }
  }

  ShuffledDataset data;
  const int n = static_cast<int>(yvals.size());
  const int m = static_cast<int>(zrows.size());
  data.x.resize(n, d);
  data.y.resize(n);
  data.z.resize(m, e);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) data.x(i, k) = xrows[i][k];
    data.y[i] = yvals[i];
  }
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < e; ++k) data.z(j, k) = zrows[j][k];
  if (perm_complete && static_cast<int>(perm.size()) == n && n == m) data.true_perm = perm;
  return data;
}

void write_params_json(const std::string& path, const ModelParams& params) {
  nlohmann::json j;
  j["kind"] = params.kind == ModelKind::Linear ? "linear" : "sine";
  j["w"] = std::vector<double>(params.w.data(), params.w.data() + params.w.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_params_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

ModelParams read_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_params_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  ModelParams params;
  params.kind = j.at("kind").get<std::string>() == "sine" ? ModelKind::Sine : ModelKind::Linear;
  const auto wv = j.at("w").get<std::vector<double>>();
  params.w = Eigen::Map<const Vector>(wv.data(), static_cast<int>(wv.size()));
  return params;
}

}  // namespace otreg
