#include "otreg/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "otreg/hypergrad.hpp"
#include "otreg/memlog.hpp"
#include "otreg/ot.hpp"
#include "otreg/rng.hpp"

namespace otreg {

namespace {

using Clock = std::chrono::steady_clock;

GeneratedData generate(const ExperimentSpec& spec, std::uint64_t seed) {
  if (spec.protocol == Protocol::UnlabeledSensing)
    return gen_unlabeled_sensing(spec.n, spec.e, spec.noise_var, spec.shuffle_frac, seed,
                                 spec.snr);
  return gen_nonlinear(spec.n, spec.d, spec.e, spec.noise_var, seed);
}

double perm_match_fraction(const std::vector<int>& got, const std::vector<int>& truth) {
  int hits = 0;
  for (std::size_t i = 0; i < got.size(); ++i)
    if (got[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(got.size());
}

nlohmann::json to_json(const ResultRecord& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["seed"] = r.seed;
  if (r.aggregate) {
    j["aggregate"] = true;
    j["mean_relative_error"] = r.mean_relative_error;
    j["std_relative_error"] = r.std_relative_error;
    j["runs"] = r.runs;
    return j;
  }
  if (!r.error.empty()) {
    j["error"] = r.error;
    return j;
  }
  j["relative_error"] = r.relative_error;
  j["train_residual"] = r.train_residual;
  j["wall_time_s"] = r.wall_time_s;
  if (r.perm_accuracy) j["perm_accuracy"] = *r.perm_accuracy;
  return j;
}

ResultRecord from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.method = j.at("method").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  if (j.value("aggregate", false)) {
    r.aggregate = true;
    r.mean_relative_error = j.value("mean_relative_error", 0.0);
    r.std_relative_error = j.value("std_relative_error", 0.0);
    r.runs = j.value("runs", 0);
    return r;
  }
  if (j.contains("error")) {
    r.error = j.at("error").get<std::string>();
    return r;
  }
  r.relative_error = j.value("relative_error", 0.0);
  r.train_residual = j.value("train_residual", 0.0);
  r.wall_time_s = j.value("wall_time_s", 0.0);
  if (j.contains("perm_accuracy")) r.perm_accuracy = j.at("perm_accuracy").get<double>();
  return r;
}

}  // namespace

ResultRecord run_single(const ExperimentSpec& spec, const std::string& method,
                        std::uint64_t seed) {
  ResultRecord rec;
  rec.method = method;
  rec.seed = seed;
  try {
    const GeneratedData data = generate(spec, seed);
    TrainConfig cfg = spec.train;
    cfg.seed = seed;
    const ModelKind kind =
        spec.protocol == Protocol::UnlabeledSensing ? ModelKind::Linear : ModelKind::Sine;

    TrainReport rep;
    if (method == "robot") {
      rep = robot_train(data.train, kind, cfg);
    } else if (method == "robot_robust") {
      rep = robot_robust_train(data.train, kind, cfg, spec.robust);
    } else if (method == "am") {
      rep = am_train(data.train, kind, cfg);
    } else if (method == "ls") {
      rep = least_squares_train(data.train, kind, cfg);
    } else if (method == "oracle") {
      rep = oracle_train(data.train, kind, cfg);
    } else if (method == "rs") {
      rep = rs_train(data.train, cfg, cfg.rs_iters, cfg.inlier_tol);
    } else {
      throw std::invalid_argument("unknown method: " + method);
    }

    rec.relative_error = relative_error(rep.final_params, data.test);
    rec.train_residual = rep.objective_trace.empty() ? 0.0 : rep.objective_trace.back();
    rec.wall_time_s = rep.wall_time_s;
    if (rep.recovered_perm && data.train.true_perm)
      rec.perm_accuracy = perm_match_fraction(*rep.recovered_perm, *data.train.true_perm);
  } catch (const std::exception& ex) {
    rec.error = ex.what();
  }
  return rec;
}

std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec,
                                         const std::string& out_path) {
  struct Task {
    std::string method;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& method : spec.methods)
    for (const auto seed : spec.seeds) tasks.push_back({method, seed});

  std::vector<ResultRecord> records(tasks.size());
  const int workers = std::max(1, std::min<int>(spec.workers, static_cast<int>(tasks.size())));
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t)
      records[t] = run_single(spec, tasks[t].method, tasks[t].seed);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t t = next.fetch_add(1);
        if (t >= tasks.size()) return;
        records[t] = run_single(spec, tasks[t].method, tasks[t].seed);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Per-method aggregates over successful runs.
  for (const auto& method : spec.methods) {
    double sum = 0.0, sumsq = 0.0;
    int runs = 0;
    for (const auto& r : records)
      if (!r.aggregate && r.method == method && r.error.empty()) {
        sum += r.relative_error;
        sumsq += r.relative_error * r.relative_error;
        ++runs;
      }
    ResultRecord agg;
    agg.method = method;
    agg.aggregate = true;
    agg.runs = runs;
    if (runs > 0) {
      agg.mean_relative_error = sum / runs;
      const double var = std::max(0.0, sumsq / runs - agg.mean_relative_error * agg.mean_relative_error);
      agg.std_relative_error = std::sqrt(var);
    }
    records.push_back(agg);
  }

  if (!out_path.empty()) write_results_jsonl(out_path, records);
  return records;
}

void write_results_jsonl(const std::string& path, const std::vector<ResultRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_results_jsonl: cannot open " + path);
  for (const auto& r : records) out << to_json(r).dump() << "\n";
}

std::vector<ResultRecord> read_results_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_results_jsonl: cannot open " + path);
  std::vector<ResultRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(from_json(nlohmann::json::parse(line)));
  }
  return records;
}

std::vector<BenchRow> bench_backward(const std::vector<int>& sizes, double epsilon) {
  std::vector<BenchRow> rows;
  for (const int n : sizes) {
    const GeneratedData data = gen_unlabeled_sensing(n, 5, 0.01, 0.5, 1234);
    BenchRow row;
    row.n = n;
    memlog::ScopedTracking tracking;
    {
      const Matrix C = cost_matrix(data.true_params, data.train);
      memlog::NotedBytes c_note(sizeof(double) * static_cast<std::size_t>(n) * n);
      const Vector marg = Vector::Constant(n, 1.0 / n);
      SinkhornConfig cfg{epsilon, 20000, 1e-9};

      const auto t0 = Clock::now();
      const SinkhornSolution sol = sinkhorn_solve(C, marg, marg, cfg);
      memlog::NotedBytes plan_note(sizeof(double) * static_cast<std::size_t>(n) * n);
      const auto t1 = Clock::now();
      const ModelCostGradient grad = cost_matrix_grad(data.true_params, data.train);
      const Vector g = exact_hypergradient(C, grad, sol, epsilon);
      const auto t2 = Clock::now();

      row.forward_s = std::chrono::duration<double>(t1 - t0).count();
      row.backward_s = std::chrono::duration<double>(t2 - t1).count();
      row.sinkhorn_iters = sol.iterations;
      if (!g.allFinite()) throw NonFinite("bench_backward: gradient not finite");
    }
    row.peak_bytes = tracking.stats().peak;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace otreg
