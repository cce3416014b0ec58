#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "otreg/data.hpp"
#include "otreg/experiment.hpp"
#include "otreg/hypergrad.hpp"
#include "otreg/ot.hpp"
#include "otreg/robust.hpp"
#include "otreg/train.hpp"

namespace py = pybind11;
using namespace otreg;

namespace {

ModelKind parse_kind(const std::string& kind) {
  if (kind == "linear") return ModelKind::Linear;
  if (kind == "sine") return ModelKind::Sine;
  throw std::invalid_argument("kind must be 'linear' or 'sine'");
}

ShuffledDataset make_dataset(const Matrix& x, const Vector& y, const Matrix& z,
                             const std::optional<std::vector<int>>& perm) {
  ShuffledDataset data;
  data.x = x;
  data.y = y;
  data.z = z;
  data.true_perm = perm;
  data.validate();
  return data;
}

py::dict solution_dict(const SinkhornSolution& sol) {
  py::dict out;
  out["plan"] = sol.plan.entries;
  out["xi"] = sol.duals.xi;
  out["zeta"] = sol.duals.zeta;
  out["iterations"] = sol.iterations;
  out["converged"] = sol.converged;
  out["marginal_violation"] = sol.marginal_violation;
  return out;
}

}  // namespace

PYBIND11_MODULE(otreg, m) {
  m.doc() = "Shuffled regression via entropic optimal transport";

  m.def(
      "sinkhorn",
      [](const Matrix& C, const Vector& mu, const Vector& nu, double epsilon, double tol,
         int max_iters) {
        return solution_dict(sinkhorn_solve(C, mu, nu, SinkhornConfig{epsilon, max_iters, tol}));
      },
      py::arg("cost"), py::arg("mu"), py::arg("nu"), py::arg("epsilon"),
      py::arg("tol") = 1e-9, py::arg("max_iters") = 10000);

  m.def("entropic_objective", &entropic_objective, py::arg("cost"), py::arg("plan"),
        py::arg("epsilon"));

  m.def(
      "assignment",
      [](const Matrix& C, bool brute_force) {
        const Assignment a = brute_force ? assignment_bruteforce(C) : assignment_lp(C);
        return py::make_tuple(a.perm, a.cost);
      },
      py::arg("cost"), py::arg("brute_force") = false);

  m.def("round_to_permutation", &round_to_permutation, py::arg("plan"));

  m.def(
      "robust_solve",
      [](const Matrix& C, const Vector& mu, const Vector& nu, double epsilon, double epsilon1,
         double epsilon2, double rho1, double rho2, double eta, int outer_iters) {
        RobustConfig cfg;
        cfg.epsilon = epsilon;
        cfg.epsilon1 = epsilon1;
        cfg.epsilon2 = epsilon2;
        cfg.rho1 = rho1;
        cfg.rho2 = rho2;
        cfg.eta = eta;
        cfg.outer_iters = outer_iters;
        const RobustSolution sol = robust_solve(C, mu, nu, cfg);
        py::dict out;
        out["plan"] = sol.plan.entries;
        out["mu_bar"] = sol.mu_bar;
        out["nu_bar"] = sol.nu_bar;
        out["xi"] = sol.duals.xi;
        out["zeta"] = sol.duals.zeta;
        out["converged"] = sol.converged;
        return out;
      },
      py::arg("cost"), py::arg("mu"), py::arg("nu"), py::arg("epsilon"),
      py::arg("epsilon1") = 1e-3, py::arg("epsilon2") = 1e-3, py::arg("rho1") = 1e-3,
      py::arg("rho2") = 1e-3, py::arg("eta") = 1e-3, py::arg("outer_iters") = 500);

  m.def(
      "cost_matrix",
      [](const std::string& kind, const Vector& w, const Matrix& x, const Vector& y,
         const Matrix& z) {
        return cost_matrix(ModelParams{w, parse_kind(kind)}, make_dataset(x, y, z, {}));
      },
      py::arg("kind"), py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"));

  m.def(
      "hypergradient",
      [](const std::string& kind, const Vector& w, const Matrix& x, const Vector& y,
         const Matrix& z, double epsilon, double tol, int max_iters) {
        const ModelParams params{w, parse_kind(kind)};
        const ShuffledDataset data = make_dataset(x, y, z, {});
        const Matrix C = cost_matrix(params, data);
        const Vector mu = Vector::Constant(data.n(), 1.0 / data.n());
        const Vector nu = Vector::Constant(data.m(), 1.0 / data.m());
        const auto sol = sinkhorn_solve(C, mu, nu, SinkhornConfig{epsilon, max_iters, tol});
        return exact_hypergradient(C, cost_matrix_grad(params, data), sol, epsilon);
      },
      py::arg("kind"), py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"),
      py::arg("epsilon"), py::arg("tol") = 1e-10, py::arg("max_iters") = 100000);

  m.def(
      "robust_hypergradient",
      [](const std::string& kind, const Vector& w, const Matrix& x, const Vector& y,
         const Matrix& z, double epsilon, double epsilon1, double epsilon2, double rho1,
         double rho2, double eta, int outer_iters) {
        const ModelParams params{w, parse_kind(kind)};
        const ShuffledDataset data = make_dataset(x, y, z, {});
        const Matrix C = cost_matrix(params, data);
        RobustConfig cfg;
        cfg.epsilon = epsilon;
        cfg.epsilon1 = epsilon1;
        cfg.epsilon2 = epsilon2;
        cfg.rho1 = rho1;
        cfg.rho2 = rho2;
        cfg.eta = eta;
        cfg.outer_iters = outer_iters;
        const Vector mu = Vector::Constant(data.n(), 1.0 / data.n());
        const Vector nu = Vector::Constant(data.m(), 1.0 / data.m());
        const RobustSolution sol = robust_solve(C, mu, nu, cfg);
        return robust_hypergradient(C, cost_matrix_grad(params, data), sol, cfg);
      },
      py::arg("kind"), py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"),
      py::arg("epsilon"), py::arg("epsilon1") = 1e-3, py::arg("epsilon2") = 1e-3,
      py::arg("rho1") = 0.05, py::arg("rho2") = 0.05, py::arg("eta") = 1e-3,
      py::arg("outer_iters") = 20000);

  m.def(
      "relative_error",
      [](const std::string& kind, const Vector& w, const Matrix& x, const Vector& y,
         const Matrix& z) {
        return relative_error(ModelParams{w, parse_kind(kind)}, make_dataset(x, y, z, {}));
      },
      py::arg("kind"), py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"));

  m.def("condition_numbers", &condition_numbers, py::arg("d1"), py::arg("d2"), py::arg("rho"),
        py::arg("lambda_"));
  m.def("condition_numbers_numeric", &condition_numbers_numeric, py::arg("d1"), py::arg("d2"),
        py::arg("rho"), py::arg("lambda_"));

  m.def(
      "gen_unlabeled_sensing",
      [](int n, int e, double noise_var, double shuffle_frac, std::uint64_t seed,
         std::optional<double> snr) {
        const GeneratedData g = gen_unlabeled_sensing(n, e, noise_var, shuffle_frac, seed, snr);
        py::dict out;
        out["train_y"] = g.train.y;
        out["train_z"] = g.train.z;
        out["true_perm"] = *g.train.true_perm;
        out["test_y"] = g.test.y;
        out["test_z"] = g.test.z;
        out["w"] = g.true_params.w;
        out["noise_var"] = g.noise_var;
        return out;
      },
      py::arg("n"), py::arg("e"), py::arg("noise_var"), py::arg("shuffle_frac"), py::arg("seed"),
      py::arg("snr") = std::nullopt);

  m.def(
      "train",
      [](const std::string& method, const std::string& kind, const Matrix& x, const Vector& y,
         const Matrix& z, const std::optional<std::vector<int>>& true_perm, double lr, int iters,
         int batch_size, double epsilon, std::uint64_t seed, const std::string& init,
         double rho1, double rho2) {
        const ShuffledDataset data = make_dataset(x, y, z, true_perm);
        const ModelKind mk = parse_kind(kind);
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.iters = iters;
        cfg.batch_size = batch_size;
        cfg.epsilon = epsilon;
        cfg.seed = seed;
        cfg.init = init == "randn"  ? InitKind::RandomNormal
                   : init == "rs"   ? InitKind::FromRS
                                    : InitKind::Zeros;
        TrainReport rep;
        if (method == "robot") {
          rep = robot_train(data, mk, cfg);
        } else if (method == "robot_robust") {
          RobustConfig rcfg;
          rcfg.rho1 = rho1;
          rcfg.rho2 = rho2;
          rep = robot_robust_train(data, mk, cfg, rcfg);
        } else if (method == "am") {
          rep = am_train(data, mk, cfg);
        } else if (method == "ls") {
          rep = least_squares_train(data, mk, cfg);
        } else if (method == "oracle") {
          rep = oracle_train(data, mk, cfg);
        } else if (method == "rs") {
          rep = rs_train(data, cfg, cfg.rs_iters, cfg.inlier_tol);
        } else {
          throw std::invalid_argument("unknown method: " + method);
        }
        py::dict out;
        out["w"] = rep.final_params.w;
        out["objective_trace"] = rep.objective_trace;
        out["wall_time_s"] = rep.wall_time_s;
        if (rep.recovered_perm) out["recovered_perm"] = *rep.recovered_perm;
        return out;
      },
      py::arg("method"), py::arg("kind"), py::arg("x"), py::arg("y"), py::arg("z"),
      py::arg("true_perm") = std::nullopt, py::arg("lr") = 1e-4, py::arg("iters") = 100,
      py::arg("batch_size") = 100, py::arg("epsilon") = 1e-3, py::arg("seed") = 0,
      py::arg("init") = "zeros", py::arg("rho1") = 1e-3, py::arg("rho2") = 1e-3);
}
