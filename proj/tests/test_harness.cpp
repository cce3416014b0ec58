#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "otreg/data.hpp"
#include "otreg/experiment.hpp"

using namespace otreg;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("unlabeled sensing generator") {
  SUBCASE("identical seeds give identical datasets") {
    const GeneratedData a = gen_unlabeled_sensing(64, 5, 0.1, 0.5, 7);
    const GeneratedData b = gen_unlabeled_sensing(64, 5, 0.1, 0.5, 7);
    CHECK((a.train.y - b.train.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.train.z - b.train.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.test.y - b.test.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK(*a.train.true_perm == *b.train.true_perm);
  }
  SUBCASE("no shuffling leaves the identity correspondence") {
    const GeneratedData g = gen_unlabeled_sensing(32, 3, 0.1, 0.0, 1);
    REQUIRE(g.train.true_perm.has_value());
    for (int i = 0; i < 32; ++i) CHECK((*g.train.true_perm)[i] == i);
  }
  SUBCASE("shapes match the protocol") {
    const GeneratedData g = gen_unlabeled_sensing(1000, 10, 0.1, 0.5, 2);
    CHECK(g.train.z.rows() == 1000);
    CHECK(g.train.z.cols() == 10);
    CHECK(g.train.y.size() == 1000);
    CHECK(g.train.d() == 0);
  }
  SUBCASE("the recorded permutation pairs labels with their generators") {
    const GeneratedData g = gen_unlabeled_sensing(50, 4, 0.0, 0.7, 3);
    for (int i = 0; i < 50; ++i) {
      const double fit = g.train.z.row((*g.train.true_perm)[i]).dot(g.true_params.w);
      CHECK(g.train.y[i] == doctest::Approx(fit).epsilon(1e-12));
    }
    // test set is identity-aligned
    for (int i = 0; i < 50; ++i) CHECK((*g.test.true_perm)[i] == i);
  }
  SUBCASE("snr overrides the noise variance") {
    const GeneratedData g = gen_unlabeled_sensing(16, 4, 0.7, 0.0, 4, 100.0);
    CHECK(g.noise_var == doctest::Approx(g.true_params.w.squaredNorm() / 100.0));
  }
}

TEST_CASE("nonlinear generator") {
  const GeneratedData g = gen_nonlinear(1000, 2, 3, 0.1, 11);
  CHECK(g.train.n() == 800);
  CHECK(g.train.m() == 1000);
  CHECK(!g.train.true_perm.has_value());
  CHECK(g.test.n() == 200);
  CHECK(g.test.m() == 200);

  // noiseless residual under the true correspondence is zero
  const GeneratedData h = gen_nonlinear(50, 2, 3, 0.0, 12);
  for (int i = 0; i < h.test.n(); ++i) {
    const double f = predict(h.true_params, h.test.x.row(i), h.test.z.row(i));
    CHECK(h.test.y[i] == doctest::Approx(f).epsilon(1e-12));
  }
}

TEST_CASE("dataset csv round trip") {
  SUBCASE("square with ground truth") {
    const GeneratedData g = gen_unlabeled_sensing(20, 3, 0.1, 0.5, 5);
    const std::string path = temp_path("otreg_square.csv");
    write_dataset_csv(path, g.train);
    const ShuffledDataset back = read_dataset_csv(path);
    CHECK((back.y - g.train.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.z - g.train.z).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.true_perm.has_value());
    CHECK(*back.true_perm == *g.train.true_perm);
    std::remove(path.c_str());
  }
  SUBCASE("rectangular without ground truth") {
    const GeneratedData g = gen_nonlinear(40, 2, 3, 0.1, 6);
    const std::string path = temp_path("otreg_rect.csv");
    write_dataset_csv(path, g.train);
    const ShuffledDataset back = read_dataset_csv(path);
    CHECK(back.n() == g.train.n());
    CHECK(back.m() == g.train.m());
    CHECK((back.x - g.train.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.z - g.train.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK(!back.true_perm.has_value());
    std::remove(path.c_str());
  }
}

TEST_CASE("params json round trip") {
  ModelParams params;
  params.kind = ModelKind::Sine;
  params.w = Vector::LinSpaced(5, -2.0, 2.0);
  const std::string path = temp_path("otreg_params.json");
  write_params_json(path, params);
  const ModelParams back = read_params_json(path);
  CHECK(back.kind == ModelKind::Sine);
  CHECK((back.w - params.w).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("results jsonl round trip") {
  std::vector<ResultRecord> records(3);
  records[0].method = "robot";
  records[0].seed = 1;
  records[0].relative_error = 0.25;
  records[0].train_residual = 12.5;
  records[0].wall_time_s = 0.75;
  records[0].perm_accuracy = 0.9;
  records[1].method = "rs";
  records[1].seed = 2;
  records[1].error = "SingularSample";
  records[2].method = "robot";
  records[2].aggregate = true;
  records[2].mean_relative_error = 0.25;
  records[2].std_relative_error = 0.0;
  records[2].runs = 1;

  const std::string path = temp_path("otreg_results.jsonl");
  write_results_jsonl(path, records);
  const auto back = read_results_jsonl(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].method == "robot");
  CHECK(back[0].relative_error == 0.25);
  CHECK(back[0].perm_accuracy.has_value());
  CHECK(*back[0].perm_accuracy == 0.9);
  CHECK(back[1].error == "SingularSample");
  CHECK(back[2].aggregate);
  CHECK(back[2].runs == 1);
  std::remove(path.c_str());
}

TEST_CASE("run_experiment") {
  SUBCASE("empty method list writes an empty result file and succeeds") {
    ExperimentSpec spec;
    spec.seeds = {1, 2};
    spec.methods = {};
    const std::string path = temp_path("otreg_empty.jsonl");
    const auto records = run_experiment(spec, path);
    CHECK(records.empty());
    CHECK(read_results_jsonl(path).empty());
    std::remove(path.c_str());
  }
  SUBCASE("oracle on noiseless data is near exact") {
    ExperimentSpec spec;
    spec.protocol = Protocol::UnlabeledSensing;
    spec.n = 80;
    spec.e = 3;
    spec.noise_var = 0.0;
    spec.shuffle_frac = 0.5;
    spec.seeds = {1};
    spec.methods = {"oracle"};
    spec.train.iters = 3000;
    spec.train.learning_rate = 2e-3;
    const auto records = run_experiment(spec, "");
    REQUIRE(records.size() == 2);  // run + aggregate
    CHECK(records[0].error.empty());
    CHECK(records[0].relative_error <= 1e-6);
    CHECK(records[1].aggregate);
  }
  SUBCASE("failures are recorded, not thrown") {
    ExperimentSpec spec;
    spec.protocol = Protocol::NonlinearRegression;
    spec.n = 30;
    spec.d = 2;
    spec.e = 3;
    spec.seeds = {1};
    spec.methods = {"rs"};  // rs requires the linear model: must fail politely
    const auto records = run_experiment(spec, "");
    REQUIRE(records.size() == 2);
    CHECK(!records[0].error.empty());
    CHECK(records[1].runs == 0);
  }
  SUBCASE("identical specs reproduce identical records") {
    ExperimentSpec spec;
    spec.protocol = Protocol::UnlabeledSensing;
    spec.n = 40;
    spec.e = 2;
    spec.noise_var = 0.01;
    spec.shuffle_frac = 0.5;
    spec.seeds = {3, 4};
    spec.methods = {"ls", "am"};
    spec.train.iters = 50;
    spec.train.batch_size = 20;
    spec.train.learning_rate = 1e-3;
    spec.workers = 2;
    const auto a = run_experiment(spec, "");
    const auto b = run_experiment(spec, "");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].method == b[i].method);
      if (a[i].aggregate || !a[i].error.empty()) continue;
      CHECK(std::abs(a[i].relative_error - b[i].relative_error) <= 1e-10);
      CHECK(std::abs(a[i].train_residual - b[i].train_residual) <= 1e-10);
    }
  }
}

TEST_CASE("bench_backward smoke") {
  const auto rows = bench_backward({40}, 0.5);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 40);
  CHECK(rows[0].peak_bytes > 3u * 40u * 40u * 8u);
  CHECK(rows[0].forward_s >= 0.0);
  CHECK(rows[0].sinkhorn_iters > 0);
}
