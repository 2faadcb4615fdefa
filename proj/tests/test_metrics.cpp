#include <algorithm>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cop2l/metrics.hpp"
#include "cop2l/model.hpp"
#include "cop2l/rng.hpp"
#include "cop2l/tasks.hpp"

namespace {

cop2l::AccuracyMatrix make_matrix(const std::vector<std::vector<double>>& rows) {
  cop2l::AccuracyMatrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

cop2l::AccuracyMatrix random_matrix(std::uint64_t seed, int tasks) {
  cop2l::SeededStream rng(seed, "matrix");
  cop2l::AccuracyMatrix m;
  for (int t = 1; t <= tasks; ++t) {
    std::vector<double> row(static_cast<std::size_t>(t));
    for (double& v : row) v = rng.uniform01();
    m.append_row(row);
  }
  return m;
}

}  // namespace

TEST_CASE("accuracy matrix enforces lower-triangular shape and value range",
          "[metrics]") {
  cop2l::AccuracyMatrix m;
  m.append_row({0.9});
  m.append_row({0.8, 0.95});
  REQUIRE(m.row_count() == 2);
  REQUIRE(m.at(1, 1) == 0.9);
  REQUIRE(m.at(2, 1) == 0.8);
  REQUIRE(m.at(2, 2) == 0.95);

  REQUIRE_THROWS_AS(m.append_row({0.1, 0.2}), std::invalid_argument);
  REQUIRE_THROWS_AS(m.append_row({0.1, 0.2, 1.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(m.at(3, 1), std::out_of_range);
  REQUIRE_THROWS_AS(m.at(1, 2), std::out_of_range);
  REQUIRE_THROWS_AS(m.at(0, 1), std::out_of_range);
}

TEST_CASE("average accuracy is the mean of the requested checkpoint row",
          "[metrics]") {
  auto single = make_matrix({{0.9}});
  REQUIRE(cop2l::average_accuracy(single, 1) == 0.9);

  auto two = make_matrix({{1.0}, {1.0, 0.0}});
  REQUIRE(cop2l::average_accuracy(two, 2) == 0.5);
  REQUIRE(cop2l::average_accuracy(two, 1) == 1.0);

  REQUIRE_THROWS_AS(cop2l::average_accuracy(two, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(cop2l::average_accuracy(two, 0), std::invalid_argument);
}

TEST_CASE("average forgetting compares immediate and final task accuracies",
          "[metrics]") {
  auto drop = make_matrix({{0.9}, {0.8, 0.7}});
  REQUIRE(std::abs(cop2l::average_forgetting(drop, 2) - 0.1) < 1e-15);

  auto flat = make_matrix({{0.6}, {0.6, 0.8}, {0.6, 0.8, 0.4}});
  REQUIRE(cop2l::average_forgetting(flat, 3) == 0.0);

  auto gain = make_matrix({{0.9}, {0.95, 0.7}});
  REQUIRE(std::abs(cop2l::average_forgetting(gain, 2) - (-0.05)) < 1e-15);

  REQUIRE_THROWS_AS(cop2l::average_forgetting(drop, 1), std::domain_error);
  REQUIRE_THROWS_AS(cop2l::average_forgetting(drop, 3), std::invalid_argument);
}

TEST_CASE("plasticity averages the diagonal of immediate accuracies", "[metrics]") {
  auto m = make_matrix({{1.0}, {0.2, 0.8}, {0.1, 0.1, 0.0}});
  REQUIRE(cop2l::plasticity(m, 2) == Catch::Approx(0.9).margin(1e-15));
  REQUIRE(cop2l::plasticity(m, 1) == 1.0);
  REQUIRE(cop2l::plasticity(m, 3) == Catch::Approx(0.6).margin(1e-15));

  auto zero = make_matrix({{0.0}, {0.0, 0.0}});
  REQUIRE(cop2l::plasticity(zero, 2) == 0.0);
  REQUIRE_THROWS_AS(cop2l::plasticity(zero, 3), std::invalid_argument);
}

TEST_CASE("forgetting, final accuracy, and the diagonal satisfy their identity",
          "[metrics]") {
  // forgetting(T) + mean over t < T of A[T][t] equals the diagonal mean over
  // t < T, by rearranging the definition. Checked numerically on random data.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    int tasks = 2 + static_cast<int>(seed % 4);
    auto m = random_matrix(seed, tasks);
    double forgetting = cop2l::average_forgetting(m, tasks);
    double old_final = 0.0, old_diag = 0.0;
    for (int t = 1; t < tasks; ++t) {
      old_final += m.at(tasks, t);
      old_diag += m.at(t, t);
    }
    old_final /= tasks - 1;
    old_diag /= tasks - 1;
    REQUIRE(std::abs(forgetting + old_final - old_diag) < 1e-12);
  }
}

TEST_CASE("metrics match a direct recomputation on random matrices", "[metrics]") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    int tasks = 2 + static_cast<int>(seed % 5);
    auto m = random_matrix(seed, tasks);
    for (int upto = 1; upto <= tasks; ++upto) {
      long double acc = 0.0L;
      for (int t = 1; t <= upto; ++t) acc += m.at(upto, t);
      REQUIRE(std::abs(cop2l::average_accuracy(m, upto) -
                       static_cast<double>(acc / upto)) < 1e-12);

      long double diag = 0.0L;
      for (int t = 1; t <= upto; ++t) diag += m.at(t, t);
      REQUIRE(std::abs(cop2l::plasticity(m, upto) -
                       static_cast<double>(diag / upto)) < 1e-12);

      if (upto >= 2) {
        long double f = 0.0L;
        for (int t = 1; t < upto; ++t) f += m.at(t, t) - m.at(upto, t);
        REQUIRE(std::abs(cop2l::average_forgetting(m, upto) -
                         static_cast<double>(f / (upto - 1))) < 1e-12);
      }
    }
  }
}

TEST_CASE("dataset accuracy is invariant to test example order", "[metrics]") {
  auto stream = cop2l::synthetic_blobs(1, 3, 30, 40, 4, 3.0, 1.0, 21u);
  cop2l::LearnerConfig cfg;
  cfg.architecture = cop2l::Architecture::kSoftmax;
  cfg.input_dim = 4;
  cfg.class_count = 3;
  cfg.learning_rate = 0.5;
  cfg.epochs_per_update = 30;
  cfg.init_seed = 5u;
  auto m = cop2l::Model::single_head(cfg);
  auto theta = m.update(m.init_params(), stream.task(1).train);

  auto test = stream.task(1).test;
  double acc = cop2l::dataset_accuracy(m, theta, test);
  REQUIRE(acc > 0.5);
  std::reverse(test.begin(), test.end());
  REQUIRE(cop2l::dataset_accuracy(m, theta, test) == acc);

  REQUIRE_THROWS_AS(cop2l::dataset_accuracy(m, theta, {}), std::invalid_argument);
}

TEST_CASE("full-scale reference results are available as named constants",
          "[metrics]") {
  REQUIRE(cop2l::kMnistFiveTaskReferenceAccuracy == 95.12);
  REQUIRE(cop2l::kMnistFiveTaskReferenceForgetting == 3.35);
}
