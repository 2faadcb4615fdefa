#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "cop2l/model.hpp"
#include "cop2l/rng.hpp"

using Catch::Approx;
using cop2l::Architecture;
using cop2l::HeadMode;
using cop2l::LearnerConfig;
using cop2l::Model;
using cop2l::ParameterVector;
using cop2l::WeightedExample;

namespace {

LearnerConfig softmax_cfg(int dim, int classes, std::uint64_t seed = 42) {
  LearnerConfig cfg;
  cfg.architecture = Architecture::kSoftmax;
  cfg.input_dim = dim;
  cfg.class_count = classes;
  cfg.learning_rate = 0.1;
  cfg.epochs_per_update = 1;
  cfg.init_seed = seed;
  return cfg;
}

LearnerConfig mlp_cfg(int dim, int classes, int hidden, std::uint64_t seed = 42) {
  LearnerConfig cfg = softmax_cfg(dim, classes, seed);
  cfg.architecture = Architecture::kMlp;
  cfg.hidden_width = hidden;
  return cfg;
}

WeightedExample make_example(std::vector<double> x, int y, double w = 1.0,
                             int task = 1, std::int64_t idx = 0) {
  WeightedExample e;
  e.x = std::move(x);
  e.y = y;
  e.w = w;
  e.task_id = task;
  e.global_index = idx;
  return e;
}

std::vector<WeightedExample> random_batch(const Model& model, cop2l::SeededStream& rng,
                                          int count) {
  std::vector<WeightedExample> batch;
  for (int i = 0; i < count; ++i) {
    std::vector<double> x(model.config().input_dim);
    for (auto& v : x) v = rng.gaussian();
    int y = static_cast<int>(rng.uniform_below(model.config().class_count));
    batch.push_back(make_example(std::move(x), y, 1.0, 1, i));
  }
  return batch;
}

// Independent reimplementation of softmax cross-entropy for the loss oracle.
double ref_softmax_ce(const std::vector<double>& theta, int dim, int classes,
                      const std::vector<double>& x, int y) {
  std::vector<long double> scores(classes, 0.0L);
  for (int c = 0; c < classes; ++c) {
    for (int d = 0; d < dim; ++d) scores[c] += static_cast<long double>(theta[c * dim + d]) * x[d];
    scores[c] += theta[classes * dim + c];
  }
  long double mx = scores[0];
  for (long double s : scores) mx = std::max(mx, s);
  long double z = 0.0L;
  for (long double s : scores) z += std::exp(s - mx);
  long double logp = scores[y] - mx - std::log(z);
  return static_cast<double>(-logp);
}

double mean_weighted_loss(const Model& model, const ParameterVector& theta,
                          const std::vector<WeightedExample>& batch) {
  double total = 0.0;
  for (const auto& e : batch) total += e.w * model.ce_loss(theta, e);
  return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("parameter initialization is seed-deterministic", "[model]") {
  Model m = Model::single_head(softmax_cfg(4, 3, 7));
  ParameterVector a = m.init_params();
  ParameterVector b = m.init_params();
  REQUIRE(a.values.size() == 15);  // 4*3 weights + 3 biases
  CHECK(a.values == b.values);

  Model m2 = Model::single_head(softmax_cfg(4, 3, 8));
  ParameterVector c = m2.init_params();
  CHECK(a.values != c.values);

  // Biases land at zero, weights do not (almost surely).
  int nonzero = 0;
  for (int i = 0; i < 12; ++i) nonzero += a.values[i] != 0.0;
  CHECK(nonzero == 12);
  for (int i = 12; i < 15; ++i) CHECK(a.values[i] == 0.0);
}

TEST_CASE("update is deterministic and respects dimension checks", "[model]") {
  Model m = Model::single_head(mlp_cfg(5, 3, 8));
  ParameterVector theta = m.init_params();
  cop2l::SeededStream rng(1, "batch");
  auto batch = random_batch(m, rng, 12);

  ParameterVector u1 = m.update(theta, batch);
  ParameterVector u2 = m.update(theta, batch);
  CHECK(u1.values == u2.values);
  CHECK(u1.values != theta.values);

  auto bad = batch;
  bad[3].x.pop_back();
  CHECK_THROWS_AS(m.update(theta, bad), std::invalid_argument);
  CHECK_THROWS_AS(m.update(theta, {}), std::invalid_argument);
}

TEST_CASE("single-example softmax step descends the analytic gradient", "[model]") {
  LearnerConfig cfg = softmax_cfg(4, 3);
  cfg.learning_rate = 0.05;
  Model m = Model::single_head(cfg);
  ParameterVector theta = m.init_params();
  auto e = make_example({0.5, -1.2, 0.3, 2.0}, 1);
  std::vector<WeightedExample> batch{e};

  std::vector<double> grad = m.batch_gradient(theta, batch);
  ParameterVector stepped = m.update(theta, batch);
  for (std::size_t i = 0; i < grad.size(); ++i)
    CHECK(stepped.values[i] == Approx(theta.values[i] - 0.05 * grad[i]).margin(1e-15));

  // Central finite differences on the weighted mean loss, step 1e-6.
  for (std::size_t i = 0; i < theta.values.size(); ++i) {
    ParameterVector up = theta, dn = theta;
    up.values[i] += 1e-6;
    dn.values[i] -= 1e-6;
    double fd = (mean_weighted_loss(m, up, batch) - mean_weighted_loss(m, dn, batch)) /
                2e-6;
    INFO("coordinate " << i);
    CHECK(std::abs(grad[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("analytic gradients match finite differences on random batches", "[model]") {
  cop2l::SeededStream rng(99, "fd");
  std::vector<Model> models;
  models.push_back(Model::single_head(softmax_cfg(6, 4, 3)));
  models.push_back(Model::single_head(mlp_cfg(6, 4, 10, 3)));
  for (int trial = 0; trial < 20; ++trial) {
    const Model& m = models[trial % 2];
    ParameterVector theta = m.init_params();
    for (auto& v : theta.values) v += 0.3 * rng.gaussian();
    auto batch = random_batch(m, rng, 5);
    for (auto& e : batch) e.w = (e.global_index % 2 == 0) ? 1.0 : 3.0;

    std::vector<double> grad = m.batch_gradient(theta, batch);
    for (std::size_t i = 0; i < theta.values.size(); i += 7) {
      ParameterVector up = theta, dn = theta;
      up.values[i] += 1e-6;
      dn.values[i] -= 1e-6;
      double fd =
          (mean_weighted_loss(m, up, batch) - mean_weighted_loss(m, dn, batch)) / 2e-6;
      INFO("trial " << trial << " coord " << i);
      CHECK(std::abs(grad[i] - fd) <=
            1e-4 * std::max({1e-2, std::abs(grad[i]), std::abs(fd)}));
    }
  }
}

TEST_CASE("weight scaling and inverse learning rate give the identical step", "[model]") {
  // omega a power of two makes lr/omega and omega*gradient exact in floating
  // point, so the two runs must agree bit for bit.
  const double omega = 4.0;
  LearnerConfig base = softmax_cfg(5, 3, 11);
  base.learning_rate = 0.2;
  LearnerConfig scaled = base;
  scaled.learning_rate = base.learning_rate / omega;

  Model mb = Model::single_head(base);
  Model ms = Model::single_head(scaled);
  ParameterVector theta = mb.init_params();

  cop2l::SeededStream rng(5, "wbatch");
  auto ones = random_batch(mb, rng, 9);
  auto omegas = ones;
  for (auto& e : omegas) e.w = omega;

  ParameterVector s1 = mb.update(theta, ones);
  ParameterVector s2 = ms.update(theta, omegas);
  CHECK(s1.values == s2.values);
}

TEST_CASE("cross-entropy loss values and clamping", "[model]") {
  Model m = Model::single_head(softmax_cfg(4, 5));
  ParameterVector zero = m.init_params();
  for (auto& v : zero.values) v = 0.0;
  auto e = make_example({1.0, 2.0, -1.0, 0.5}, 2);
  CHECK(m.ce_loss(zero, e) == Approx(std::log(5.0)).margin(1e-12));

  // Two classes, equal scores: p = 0.5.
  Model m2 = Model::single_head(softmax_cfg(2, 2));
  ParameterVector z2 = m2.init_params();
  for (auto& v : z2.values) v = 0.0;
  CHECK(m2.ce_loss(z2, make_example({0.3, 0.7}, 0)) ==
        Approx(0.693147).margin(1e-6));

  // A hopeless logit gap hits the probability clamp instead of overflowing.
  ParameterVector skew = z2;
  skew.values[0] = 500.0;   // class-0 weight on x[0]
  skew.values[1] = -500.0;
  double clamped = m2.ce_loss(skew, make_example({1.0, 0.0}, 1));
  CHECK(clamped == Approx(-std::log(1e-12)).margin(1e-6));
  CHECK(std::isfinite(clamped));

  // Independent oracle on random parameters and inputs.
  cop2l::SeededStream rng(3, "loss-oracle");
  Model mo = Model::single_head(softmax_cfg(7, 4));
  for (int trial = 0; trial < 50; ++trial) {
    ParameterVector theta = mo.init_params();
    for (auto& v : theta.values) v = rng.gaussian();
    std::vector<double> x(7);
    for (auto& v : x) v = rng.gaussian();
    int y = static_cast<int>(rng.uniform_below(4));
    double expected = ref_softmax_ce(theta.values, 7, 4, x, y);
    CHECK(mo.ce_loss(theta, make_example(x, y)) == Approx(expected).margin(1e-10));
  }
}

TEST_CASE("zero-one loss and prediction tie-breaks", "[model]") {
  Model m = Model::single_head(softmax_cfg(3, 4));
  ParameterVector zero = m.init_params();
  for (auto& v : zero.values) v = 0.0;

  // All scores tie: smallest class index wins.
  CHECK(m.predict(zero, {1.0, 1.0, 1.0}) == 0);
  CHECK(m.zero_one(zero, make_example({1.0, 1.0, 1.0}, 0)) == 0);
  CHECK(m.zero_one(zero, make_example({1.0, 1.0, 1.0}, 2)) == 1);

  // One dominant weight row claims aligned inputs.
  ParameterVector dom = zero;
  dom.values[2 * 3 + 0] = 10.0;  // class 2, feature 0
  CHECK(m.predict(dom, {1.0, 0.0, 0.0}) == 2);
  CHECK(m.zero_one(dom, make_example({1.0, 0.0, 0.0}, 2)) == 0);
  CHECK(m.zero_one(dom, make_example({1.0, 0.0, 0.0}, 1)) == 1);

  // Exact two-way tie between classes 1 and 3: the smaller index is chosen.
  ParameterVector tie = zero;
  tie.values[1 * 3 + 1] = 2.5;
  tie.values[3 * 3 + 1] = 2.5;
  CHECK(m.predict(tie, {0.0, 1.0, 0.0}) == 1);
  CHECK(m.zero_one(tie, make_example({0.0, 1.0, 0.0}, 1)) == 0);

  // predict and zero_one agree by definition.
  cop2l::SeededStream rng(8, "agree");
  Model ma = Model::single_head(mlp_cfg(5, 3, 6));
  ParameterVector theta = ma.init_params();
  for (auto& v : theta.values) v = rng.gaussian();
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.gaussian();
    int y = static_cast<int>(rng.uniform_below(3));
    auto e = make_example(x, y);
    CHECK((ma.zero_one(theta, e) == 0) == (ma.predict(theta, x) == y));
  }
}

TEST_CASE("per-task heads route by task id", "[model]") {
  LearnerConfig cfg = mlp_cfg(4, 4, 6, 21);
  cfg.head_mode = HeadMode::kPerTask;
  Model m = Model::per_task(cfg, {{0, 1}, {2, 3}});
  ParameterVector theta = m.init_params();

  auto e1 = make_example({0.1, 0.2, 0.3, 0.4}, 1, 1.0, 1, 0);
  auto e2 = make_example({0.1, 0.2, 0.3, 0.4}, 3, 1.0, 2, 0);
  CHECK(std::isfinite(m.ce_loss(theta, e1)));
  CHECK(std::isfinite(m.ce_loss(theta, e2)));

  // Predictions stay inside the task's label set.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(4, 0.1 * trial);
    int p1 = m.predict(theta, x, 1);
    int p2 = m.predict(theta, x, 2);
    CHECK((p1 == 0 || p1 == 1));
    CHECK((p2 == 2 || p2 == 3));
  }
  CHECK_THROWS_AS(m.predict(theta, {0.1, 0.2, 0.3, 0.4}), std::invalid_argument);

  // Updates touch the shared trunk and only the example's own head.
  ParameterVector after = m.update(theta, {e1});
  bool head2_touched = false;
  auto head2 = m.head_parameter_range(2);
  for (std::size_t i = head2.first; i < head2.second; ++i)
    head2_touched |= after.values[i] != theta.values[i];
  CHECK_FALSE(head2_touched);
}

TEST_CASE("parameter checkpoints round-trip bit-exactly", "[model]") {
  Model m = Model::single_head(mlp_cfg(6, 5, 9, 1234));
  ParameterVector theta = m.init_params();
  cop2l::SeededStream rng(2, "ckpt");
  for (auto& v : theta.values) v += rng.gaussian() * 1e-3;

  std::filesystem::path path =
      std::filesystem::temp_directory_path() / "cop2l_ckpt_test.bin";
  cop2l::save_parameters(path.string(), theta, 1234);
  auto [loaded, seed] = cop2l::load_parameters(path.string());
  CHECK(seed == 1234);
  CHECK(loaded.layout == theta.layout);
  CHECK(loaded.values == theta.values);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(cop2l::load_parameters("/nonexistent/params.bin"), cop2l::IoError);
}
