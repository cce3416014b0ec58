#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otreg/data.hpp"
#include "otreg/robust.hpp"
#include "otreg/train.hpp"
#include "otreg/types.hpp"

namespace otreg {

enum class Protocol { UnlabeledSensing, NonlinearRegression };

struct ExperimentSpec {
  Protocol protocol = Protocol::UnlabeledSensing;
  int n = 1000;
  int d = 0;
  int e = 10;
  double noise_var = 0.1;
  double shuffle_frac = 0.5;
  std::optional<double> snr;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;  // subset of robot, robot_robust, am, ls, oracle, rs

  TrainConfig train;
  RobustConfig robust;
  int workers = 1;
};

struct ResultRecord {
  std::string method;
  std::uint64_t seed = 0;
  double relative_error = 0.0;
  double train_residual = 0.0;
  double wall_time_s = 0.0;
  std::optional<double> perm_accuracy;
  std::string error;  // nonempty for failed runs

  bool aggregate = false;  // aggregate rows carry mean/std over seeds
  double mean_relative_error = 0.0;
  double std_relative_error = 0.0;
  int runs = 0;
};

/// Runs every method x seed, one record per run plus one aggregate per
/// method; failures become failed records rather than aborting the sweep.
/// Appends everything to `out_path` (JSON lines) unless it is empty.
std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec, const std::string& out_path);

void write_results_jsonl(const std::string& path, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_results_jsonl(const std::string& path);

/// One run of a single method on generated data; shared by run_experiment
/// and the tests.
ResultRecord run_single(const ExperimentSpec& spec, const std::string& method,
                        std::uint64_t seed);

struct BenchRow {
  int n = 0;
  double forward_s = 0.0;
  double backward_s = 0.0;
  std::size_t peak_bytes = 0;
  int sinkhorn_iters = 0;
};

/// Timing and working-set measurement for one entropic solve plus one exact
/// hypergradient at each size.
std::vector<BenchRow> bench_backward(const std::vector<int>& sizes, double epsilon);

}  // namespace otreg
