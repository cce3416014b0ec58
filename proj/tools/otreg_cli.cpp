// Command-line harness: data generation, experiment sweeps, evaluation,
// backward-pass benchmarks, and the condition-number table.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otreg/data.hpp"
#include "otreg/experiment.hpp"
#include "otreg/models.hpp"
#include "otreg/train.hpp"

namespace {

int g_verbosity = 1;  // 0 quiet, 1 normal, 2 verbose

void log_info(const std::string& msg) {
  if (g_verbosity >= 1) std::cerr << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (g_verbosity >= 2) std::cerr << msg << "\n";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find("..");
    if (dash == std::string::npos) {
      seeds.push_back(std::stoull(tok));
    } else {
      const auto lo = std::stoull(tok.substr(0, dash));
      const auto hi = std::stoull(tok.substr(dash + 2));
      for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
    }
  }
  return seeds;
}

otreg::Protocol parse_protocol(const std::string& s) {
  if (s == "us" || s == "unlabeled_sensing") return otreg::Protocol::UnlabeledSensing;
  if (s == "nonlinear" || s == "nl") return otreg::Protocol::NonlinearRegression;
  throw CLI::ValidationError("--protocol must be us|nonlinear");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shuffled regression via entropic optimal transport"};
  app.require_subcommand(1);
  bool quiet = false, verbose = false;
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_flag("--verbose", verbose, "extra progress output");

  // Shared experiment/model flags.
  std::string protocol = "us";
  int n = 1000, d = 2, e = 10;
  double noise_var = 0.1, shuffle_frac = 0.5;
  double snr = -1.0;
  std::uint64_t seed = 1;

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (train.csv, test.csv)");
  std::string gen_out = ".";
  gen->add_option("--protocol", protocol, "us|nonlinear");
  gen->add_option("--n", n);
  gen->add_option("--d", d, "x dimension (nonlinear protocol)");
  gen->add_option("--e", e, "z dimension");
  gen->add_option("--noise-var", noise_var);
  gen->add_option("--shuffle-frac", shuffle_frac);
  gen->add_option("--snr", snr, "when positive, overrides noise variance");
  gen->add_option("--seed", seed);
  gen->add_option("--out", gen_out, "output directory");

  // --- train ---
  auto* train = app.add_subcommand("train", "run methods x seeds, write JSON-lines results");
  std::string methods_csv = "robot,ls";
  std::string seeds_csv = "1";
  std::string train_out = "results.jsonl";
  std::string params_out;
  otreg::TrainConfig tcfg;
  otreg::RobustConfig rcfg;
  int workers = 1;
  train->add_option("--protocol", protocol, "us|nonlinear");
  train->add_option("--n", n);
  train->add_option("--d", d);
  train->add_option("--e", e);
  train->add_option("--noise-var", noise_var);
  train->add_option("--shuffle-frac", shuffle_frac);
  train->add_option("--snr", snr);
  train->add_option("--methods", methods_csv, "comma list: robot,robot_robust,am,ls,oracle,rs");
  train->add_option("--seeds", seeds_csv, "comma list or a..b range");
  train->add_option("--lr", tcfg.learning_rate);
  train->add_option("--iters", tcfg.iters);
  train->add_option("--batch-size", tcfg.batch_size);
  train->add_option("--epsilon", tcfg.epsilon);
  train->add_option("--rs-iters", tcfg.rs_iters);
  train->add_option("--inlier-tol", tcfg.inlier_tol);
  train->add_option("--rs-multistart", tcfg.rs_multistart);
  train->add_option("--rho1", rcfg.rho1);
  train->add_option("--rho2", rcfg.rho2);
  train->add_option("--eta", rcfg.eta);
  train->add_option("--epsilon1", rcfg.epsilon1);
  train->add_option("--epsilon2", rcfg.epsilon2);
  train->add_option("--outer-iters", rcfg.outer_iters);
  train->add_option("--workers", workers);
  train->add_option("--out", train_out);
  train->add_option("--params-out", params_out, "save final params of the last run");
  std::string init_str = "zeros";
  train->add_option("--init", init_str, "zeros|randn|rs");
  bool recover_perm = false;
  train->add_flag("--recover-perm", recover_perm, "round the final plan to a permutation");

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "relative error of saved params on a dataset");
  std::string eval_data, eval_params;
  std::string eval_out;
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--params", eval_params)->required();
  eval->add_option("--out", eval_out, "optional JSON output path");

  // --- bench ---
  auto* bench = app.add_subcommand("bench", "forward+backward timing and working set");
  std::string ns_csv = "100,300,1000";
  double bench_eps = 0.1;
  std::string bench_out;
  bench->add_option("--ns", ns_csv, "comma list of sizes");
  bench->add_option("--epsilon", bench_eps);
  bench->add_option("--out", bench_out, "optional CSV output path");

  // --- cond ---
  auto* cond = app.add_subcommand("cond", "condition-number table (closed form vs numeric)");
  int d1 = 2, d2 = 2;
  double rho = 0.5, lambda = 0.0;
  bool cond_grid = false;
  cond->add_option("--d1", d1);
  cond->add_option("--d2", d2);
  cond->add_option("--rho", rho);
  cond->add_option("--lambda", lambda);
  cond->add_flag("--grid", cond_grid, "sweep a default grid instead of one point");

  CLI11_PARSE(app, argc, argv);
  if (quiet) g_verbosity = 0;
  if (verbose) g_verbosity = 2;

  try {
    if (*gen) {
      otreg::GeneratedData data;
      if (parse_protocol(protocol) == otreg::Protocol::UnlabeledSensing) {
        data = otreg::gen_unlabeled_sensing(
            n, e, noise_var, shuffle_frac, seed,
            snr > 0.0 ? std::optional<double>(snr) : std::nullopt);
      } else {
        data = otreg::gen_nonlinear(n, d, e, noise_var, seed);
      }
      otreg::write_dataset_csv(gen_out + "/train.csv", data.train);
      otreg::write_dataset_csv(gen_out + "/test.csv", data.test);
      otreg::write_params_json(gen_out + "/true_params.json", data.true_params);
      log_info("wrote " + gen_out + "/train.csv, test.csv, true_params.json (noise_var=" +
               std::to_string(data.noise_var) + ")");
    } else if (*train) {
      otreg::ExperimentSpec spec;
      spec.protocol = parse_protocol(protocol);
      spec.n = n;
      spec.d = d;
      spec.e = e;
      spec.noise_var = noise_var;
      spec.shuffle_frac = shuffle_frac;
      if (snr > 0.0) spec.snr = snr;
      spec.seeds = parse_seed_list(seeds_csv);
      {
        std::stringstream ss(methods_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) spec.methods.push_back(tok);
      }
      if (init_str == "randn")
        tcfg.init = otreg::InitKind::RandomNormal;
      else if (init_str == "rs")
        tcfg.init = otreg::InitKind::FromRS;
      else
        tcfg.init = otreg::InitKind::Zeros;
      tcfg.recover_perm = recover_perm;
      spec.train = tcfg;
      spec.robust = rcfg;
      spec.workers = workers;

      const auto records = otreg::run_experiment(spec, train_out);
      for (const auto& r : records) {
        if (r.aggregate) {
          log_info(r.method + ": mean_rel_err=" + std::to_string(r.mean_relative_error) +
                   " std=" + std::to_string(r.std_relative_error) + " over " +
                   std::to_string(r.runs) + " runs");
        } else if (!r.error.empty()) {
          log_info(r.method + " seed=" + std::to_string(r.seed) + " FAILED: " + r.error);
        } else {
          log_debug(r.method + " seed=" + std::to_string(r.seed) +
                    " rel_err=" + std::to_string(r.relative_error));
        }
      }
      if (!params_out.empty() && !spec.methods.empty() && !spec.seeds.empty()) {
        // Re-run the last (method, seed) pair to persist its parameters.
        const auto& method = spec.methods.back();
        const auto last_seed = spec.seeds.back();
        otreg::GeneratedData data;
        if (spec.protocol == otreg::Protocol::UnlabeledSensing)
          data = otreg::gen_unlabeled_sensing(spec.n, spec.e, spec.noise_var,
                                              spec.shuffle_frac, last_seed, spec.snr);
        else
          data = otreg::gen_nonlinear(spec.n, spec.d, spec.e, spec.noise_var, last_seed);
        otreg::TrainConfig c2 = spec.train;
        c2.seed = last_seed;
        const otreg::ModelKind kind = spec.protocol == otreg::Protocol::UnlabeledSensing
                                          ? otreg::ModelKind::Linear
                                          : otreg::ModelKind::Sine;
        otreg::TrainReport rep;
        if (method == "robot")
          rep = otreg::robot_train(data.train, kind, c2);
        else if (method == "robot_robust")
          rep = otreg::robot_robust_train(data.train, kind, c2, spec.robust);
        else if (method == "am")
          rep = otreg::am_train(data.train, kind, c2);
        else if (method == "ls")
          rep = otreg::least_squares_train(data.train, kind, c2);
        else if (method == "oracle")
          rep = otreg::oracle_train(data.train, kind, c2);
        else
          rep = otreg::rs_train(data.train, c2, c2.rs_iters, c2.inlier_tol);
        otreg::write_params_json(params_out, rep.final_params);
        log_info("wrote " + params_out);
      }
      log_info("wrote " + train_out);
    } else if (*eval) {
      const otreg::ShuffledDataset data = otreg::read_dataset_csv(eval_data);
      const otreg::ModelParams params = otreg::read_params_json(eval_params);
      const double err = otreg::relative_error(params, data);
      std::printf("relative_error %.12g\n", err);
      if (!eval_out.empty()) {
        std::ofstream out(eval_out);
        out << "{\"relative_error\": " << err << "}\n";
      }
    } else if (*bench) {
      std::vector<int> sizes;
      std::stringstream ss(ns_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
      const auto rows = otreg::bench_backward(sizes, bench_eps);
      std::ostringstream table;
      table << "n,forward_s,backward_s,total_s,peak_bytes,sinkhorn_iters\n";
      for (const auto& r : rows)
        table << r.n << "," << r.forward_s << "," << r.backward_s << ","
              << (r.forward_s + r.backward_s) << "," << r.peak_bytes << ","
              << r.sinkhorn_iters << "\n";
      std::cout << table.str();
      if (!bench_out.empty()) {
        std::ofstream out(bench_out);
        out << table.str();
      }
    } else if (*cond) {
      std::cout << "d1,d2,rho,lambda,c_am,c_robot,c_am_numeric,c_robot_numeric\n";
      auto emit = [](int a, int b, double r, double l) {
        const auto closed = otreg::condition_numbers(a, b, r, l);
        const auto numeric = otreg::condition_numbers_numeric(a, b, r, l);
        std::printf("%d,%d,%g,%g,%.12g,%.12g,%.12g,%.12g\n", a, b, r, l, closed.first,
                    closed.second, numeric.first, numeric.second);
      };
      if (cond_grid) {
        for (int a : {2, 3, 5, 8, 13})
          for (int b : {2, 3, 5, 8, 13})
            for (double r : {0.1, 0.3, 0.5, 0.7, 0.9})
              for (double l : {0.0, 0.5, 2.0}) emit(a, b, r, l);
      } else {
        emit(d1, d2, rho, lambda);
      }
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
