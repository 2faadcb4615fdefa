// Acceptance gate: eight checks covering replay soundness, certificate
// validity and tightness, forgetting mitigation, numerics oracles, metric
// identities, and byte-level determinism. Prints one verdict line per
// criterion and exits nonzero if any of them fails. Every tolerance is pinned
// right where it is used.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "cop2l/baselines.hpp"
#include "cop2l/bounds.hpp"
#include "cop2l/config.hpp"
#include "cop2l/cop2l.hpp"
#include "cop2l/experiment.hpp"
#include "cop2l/metrics.hpp"
#include "cop2l/numerics.hpp"
#include "cop2l/rng.hpp"
#include "cop2l/serialize.hpp"
#include "cop2l/tasks.hpp"

namespace fs = std::filesystem;
using namespace cop2l;

namespace {

int failures = 0;

void report(int number, const char* verdict, const std::string& detail) {
  std::printf("CRITERION %d: %s (%s)\n", number, verdict, detail.c_str());
  std::fflush(stdout);
  if (std::string(verdict) == "FAIL") ++failures;
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_params(const ParameterVector& a, const ParameterVector& b) {
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (!same_bits(a.values[i], b.values[i])) return false;
  return true;
}

bool same_record_tasks(const std::vector<TaskRecordEntry>& a,
                       const std::vector<TaskRecordEntry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].si != b[i].si || a[i].sj != b[i].sj || a[i].mu1 != b[i].mu1)
      return false;
  return true;
}

bool same_certificates(const std::vector<Certificate>& a,
                       const std::vector<Certificate>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].task_id != b[i].task_id || a[i].T != b[i].T || a[i].n_t != b[i].n_t ||
        a[i].i_size != b[i].i_size || a[i].j_size != b[i].j_size ||
        a[i].mu2 != b[i].mu2 || !same_bits(a[i].complement_loss, b[i].complement_loss) ||
        !same_bits(a[i].delta, b[i].delta) || !same_bits(a[i].bound, b[i].bound))
      return false;
  }
  return true;
}

LearnerConfig make_learner(const TaskStream& s, Architecture arch, int hidden,
                           double lr, int epochs, std::uint64_t init) {
  LearnerConfig l;
  l.architecture = arch;
  l.hidden_width = hidden;
  l.input_dim = s.input_dim;
  l.class_count = s.class_count;
  l.learning_rate = lr;
  l.epochs_per_update = epochs;
  l.init_seed = init;
  return l;
}

// 1. Training and replay agree bit for bit on twenty varied configurations.
void criterion_reconstruction() {
  const double gammas[3] = {0.6931471805599453, 0.4, 1.2};
  const double omegas[3] = {1.0, 4.0, 15.0};
  const std::uint64_t buffers[4] = {0, 24, 60, 100};
  int exact = 0;
  std::string first_bad;
  for (int s = 1; s <= 20; ++s) {
    int T = 1 + (s % 3);
    auto stream = synthetic_blobs(T, 2, 30, 20, 6, 4.0, 1.0, 200 + s);
    Architecture arch = (s % 2 == 0) ? Architecture::kMlp : Architecture::kSoftmax;
    auto lcfg = make_learner(stream, arch, arch == Architecture::kMlp ? 8 : 0, 0.5,
                             15, 40 + static_cast<std::uint64_t>(s));
    CoP2LConfig ccfg;
    ccfg.gamma = gammas[s % 3];
    ccfg.omega = omegas[(s / 3) % 3];
    ccfg.buffer_capacity = buffers[s % 4];
    ccfg.block_size = 1 + (s % 4);
    ccfg.early_stopping = (s % 5) != 0;
    ccfg.buffer_seed = 500 + static_cast<std::uint64_t>(s);
    auto run = cop2l_train(stream, lcfg, ccfg);
    auto replay = reconstruct(stream, lcfg, ccfg, run.record);
    bool ok = same_params(run.params, replay.params) &&
              same_certificates(run.certificates, replay.certificates) &&
              same_record_tasks(run.record.tasks, replay.rebuilt_tasks);
    if (ok) {
      ++exact;
    } else if (first_bad.empty()) {
      first_bad = "first divergence at config " + std::to_string(s);
    }
  }
  std::string detail = std::to_string(exact) + "/20 configurations replay bit-identically";
  if (!first_bad.empty()) detail += ", " + first_bad;
  report(1, exact == 20 ? "PASS" : "FAIL", detail);
}

// 2. Certificates upper-bound held-out risk across one hundred seeded runs.
void criterion_bound_validity() {
  int valid_runs = 0;
  double min_slack = 1e9;
  for (int s = 1; s <= 100; ++s) {
    auto stream = synthetic_blobs(3, 2, 250, 5000, 5, 3.0, 1.0, 1000 + s);
    auto lcfg = make_learner(stream, Architecture::kSoftmax, 0, 0.5, 40,
                             30 + static_cast<std::uint64_t>(s));
    CoP2LConfig ccfg;
    ccfg.omega = 5.0;
    ccfg.buffer_capacity = 300;
    ccfg.block_size = 4;
    ccfg.delta = 0.05;
    auto run = cop2l_train(stream, lcfg, ccfg);
    bool run_ok = true;
    for (const auto& cert : run.certificates) {
      double risk = 1.0 - run.accuracy.at(cert.T, cert.task_id);
      min_slack = std::min(min_slack, cert.bound - risk);
      if (risk > cert.bound) run_ok = false;
    }
    if (run_ok) ++valid_runs;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d/100 runs fully valid, need >= 97, min slack %.4f",
                valid_runs, min_slack);
  report(2, valid_runs >= 97 ? "PASS" : "FAIL", buf);
}

// 3. On a cleanly separable stream every final certificate stays below 0.25.
void criterion_nonvacuity() {
  double worst = 0.0;
  for (int s = 1; s <= 10; ++s) {
    auto stream = synthetic_blobs(2, 2, 500, 500, 8, 10.0, 0.5, 3000 + s);
    auto lcfg = make_learner(stream, Architecture::kSoftmax, 0, 0.5, 40,
                             90 + static_cast<std::uint64_t>(s));
    CoP2LConfig ccfg;
    ccfg.omega = 10.0;
    ccfg.buffer_capacity = 200;
    ccfg.block_size = 4;
    ccfg.early_stopping = false;
    auto run = cop2l_train(stream, lcfg, ccfg);
    for (const auto& cert : run.certificates)
      if (cert.T == stream.task_count()) worst = std::max(worst, cert.bound);
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst final bound %.4f, threshold 0.25", worst);
  report(3, worst < 0.25 ? "PASS" : "FAIL", buf);
}

// 4. Versus plain finetuning: forgetting at most halved, accuracy up by 0.2.
void criterion_forgetting() {
  double cop2l_forget = 0.0, finetune_forget = 0.0;
  double cop2l_acc = 0.0, finetune_acc = 0.0;
  const int seeds = 10;
  for (int s = 1; s <= seeds; ++s) {
    auto stream = synthetic_blobs(5, 2, 150, 250, 4, 4.0, 1.0, 4000 + s);
    auto lcfg = make_learner(stream, Architecture::kSoftmax, 0, 0.5, 30,
                             70 + static_cast<std::uint64_t>(s));
    CoP2LConfig ccfg;
    ccfg.omega = 10.0;
    ccfg.buffer_capacity = 500;
    ccfg.block_size = 4;
    auto run = cop2l_train(stream, lcfg, ccfg);
    BaselineConfig bcfg;
    bcfg.kind = BaselineKind::kFinetune;
    auto base = run_baseline(stream, lcfg, bcfg);
    cop2l_forget += average_forgetting(run.accuracy, 5);
    finetune_forget += average_forgetting(base.accuracy, 5);
    cop2l_acc += average_accuracy(run.accuracy, 5);
    finetune_acc += average_accuracy(base.accuracy, 5);
  }
  cop2l_forget /= seeds;
  finetune_forget /= seeds;
  cop2l_acc /= seeds;
  finetune_acc /= seeds;
  bool ok = cop2l_forget <= 0.5 * finetune_forget &&
            cop2l_acc >= finetune_acc + 0.2;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "forgetting %.3f vs %.3f (need <= half), accuracy %.3f vs %.3f "
                "(need +0.2)",
                cop2l_forget, finetune_forget, cop2l_acc, finetune_acc);
  report(4, ok ? "PASS" : "FAIL", buf);
}

// 5. Optional split MNIST check, skipped when the IDX files are not present.
void criterion_mnist() {
  std::vector<std::string> roots;
  if (const char* env = std::getenv("COP2L_MNIST_DIR")) roots.push_back(env);
  roots.push_back("data/mnist");
  roots.push_back("../data/mnist");
  std::string dir;
  for (const auto& root : roots) {
    if (fs::exists(fs::path(root) / "train-images-idx3-ubyte")) {
      dir = root;
      break;
    }
  }
  if (dir.empty()) {
    report(5, "SKIP", "MNIST IDX files not found under COP2L_MNIST_DIR or data/mnist");
    return;
  }
  auto train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  auto test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  train = detail::subsample_per_class(train, 2000);
  auto stream = split_by_class(train, test, 2, std::nullopt);
  auto lcfg = make_learner(stream, Architecture::kMlp, 100, 0.1, 5, 5);
  CoP2LConfig ccfg;
  ccfg.omega = 10.0;
  ccfg.buffer_capacity = 1000;
  ccfg.block_size = 10;
  auto run = cop2l_train(stream, lcfg, ccfg);
  double acc = average_accuracy(run.accuracy, 5);
  double forget = average_forgetting(run.accuracy, 5);
  bool ok = acc >= 0.85 && forget <= 0.12;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "accuracy %.4f (need >= 0.85), forgetting %.4f (need <= 0.12)",
                acc, forget);
  report(5, ok ? "PASS" : "FAIL", buf);
}

// 6. Numerics against independent oracles: grid-searched KL inverse, exact
// Pascal-triangle binomials, the prior's mass, and the two-set refinement.
void criterion_numerics() {
  SeededStream kl_rng(7, "acceptance-kl");
  double worst_kl = 0.0;
  for (int i = 0; i < 100; ++i) {
    double q = kl_rng.uniform01();
    double eps = 3.0 * kl_rng.uniform01() * kl_rng.uniform01();
    double best = q;
    const int grid = 1000000;
    for (int g = 1; g <= grid; ++g) {
      double p = q + (1.0 - q) * (static_cast<double>(g) / grid);
      if (binary_kl(q, p) <= eps)
        best = p;
      else
        break;  // binary_kl(q, p) increases in p on [q, 1]
    }
    worst_kl = std::max(worst_kl, std::abs(kl_inverse(q, eps) - best));
  }
  bool kl_ok = worst_kl <= 1e-5;

  long double table[31][31] = {};
  for (int n = 0; n <= 30; ++n) {
    table[n][0] = 1.0L;
    for (int k = 1; k <= n; ++k)
      table[n][k] = table[n - 1][k - 1] + (k <= n - 1 ? table[n - 1][k] : 0.0L);
  }
  long double worst_binom = 0.0L;
  for (int n = 0; n <= 30; ++n)
    for (int k = 0; k <= n; ++k)
      worst_binom = std::max(
          worst_binom,
          std::abs(static_cast<long double>(log_binomial(n, k)) - std::log(table[n][k])));
  bool binom_ok = worst_binom <= 1e-11L;

  long double mass = 0.0L;
  for (std::int64_t k = 1000000; k >= 0; --k)
    mass += static_cast<long double>(zeta_prior(static_cast<std::uint64_t>(k)));
  bool mass_ok = mass <= 1.0L;

  SeededStream pair_rng(9, "acceptance-bounds");
  int tighter = 0;
  for (int i = 0; i < 50; ++i) {
    std::uint64_t n = 50 + pair_rng.uniform_below(5000);
    std::uint64_t c = pair_rng.uniform_below(std::min<std::uint64_t>(n / 2, 400) + 1);
    double mlp = -3.0 * pair_rng.uniform01();
    double loss = 0.5 * pair_rng.uniform01();
    double delta = 0.01 + 0.2 * pair_rng.uniform01();
    double two = two_set_bound(n, c, 0, mlp, loss, delta);
    double one = compression_message_bound(n, c, mlp, loss, delta);
    if (two <= one + 1e-9) ++tighter;  // 1e-9 covers the bisection granularity
  }
  bool pair_ok = tighter == 50;

  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "kl grid diff %.2e (<= 1e-5), binomial diff %.2e (<= 1e-11), "
                "prior mass %.8Lf (<= 1), two-set tighter %d/50",
                worst_kl, static_cast<double>(worst_binom), mass, tighter);
  report(6, kl_ok && binom_ok && mass_ok && pair_ok ? "PASS" : "FAIL", buf);
}

// 7. Metrics agree with an independent long-double recomputation.
void criterion_metric_identities() {
  double worst = 0.0;
  for (int s = 100; s <= 109; ++s) {
    SeededStream rng(static_cast<std::uint64_t>(s), "acceptance-metrics");
    int T = 2 + (s % 5);
    AccuracyMatrix m;
    std::vector<std::vector<double>> raw;
    for (int t = 1; t <= T; ++t) {
      std::vector<double> row;
      for (int j = 0; j < t; ++j) row.push_back(rng.uniform01());
      raw.push_back(row);
      m.append_row(row);
    }
    long double acc = 0.0L, forget = 0.0L, plast = 0.0L;
    for (int t = 1; t <= T; ++t) {
      acc += raw[static_cast<std::size_t>(T - 1)][static_cast<std::size_t>(t - 1)];
      plast += raw[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(t - 1)];
    }
    for (int t = 1; t < T; ++t)
      forget += raw[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(t - 1)] -
                raw[static_cast<std::size_t>(T - 1)][static_cast<std::size_t>(t - 1)];
    acc /= T;
    plast /= T;
    forget /= (T - 1);
    worst = std::max(worst, std::abs(average_accuracy(m, T) - static_cast<double>(acc)));
    worst = std::max(worst,
                     std::abs(average_forgetting(m, T) - static_cast<double>(forget)));
    worst = std::max(worst, std::abs(plasticity(m, T) - static_cast<double>(plast)));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "10 random matrices, worst deviation %.2e (<= 1e-12)",
                worst);
  report(7, worst <= 1e-12 ? "PASS" : "FAIL", buf);
}

// 8. Re-running a config writes byte-identical artifacts, traces included.
void criterion_determinism() {
  const std::string config_text =
      "[stream]\n"
      "kind = blobs\n"
      "tasks = 2\n"
      "classes_per_task = 2\n"
      "train_per_class = 20\n"
      "test_per_class = 20\n"
      "dim = 3\n"
      "separation = 4.0\n"
      "noise = 1.0\n"
      "seed = 11\n"
      "[learner]\n"
      "architecture = softmax\n"
      "learning_rate = 0.5\n"
      "epochs = 15\n"
      "init_seed = 7\n"
      "[cop2l]\n"
      "omega = 4.0\n"
      "buffer_capacity = 20\n"
      "block_size = 2\n"
      "[run]\n"
      "methods = cop2l,finetune,replay\n"
      "seeds = 1\n"
      "mp2l_trace = true\n";
  auto cfg = parse_experiment_config(config_text);
  fs::path a = fs::temp_directory_path() / "cop2l_acceptance_det_a";
  fs::path b = fs::temp_directory_path() / "cop2l_acceptance_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  if (run_experiment(cfg, 1, a.string()) != 0 || run_experiment(cfg, 1, b.string()) != 0) {
    report(8, "FAIL", "experiment run returned nonzero");
    return;
  }
  std::vector<std::string> rel;
  for (const auto& entry : fs::recursive_directory_iterator(a))
    if (entry.is_regular_file())
      rel.push_back(fs::relative(entry.path(), a).string());
  std::sort(rel.begin(), rel.end());
  std::size_t matched = 0;
  std::string bad;
  for (const auto& r : rel) {
    if (!fs::exists(b / r)) {
      bad = r + " missing from the second run";
      break;
    }
    if (read_text_file((a / r).string()) != read_text_file((b / r).string())) {
      bad = r + " differs between runs";
      break;
    }
    ++matched;
  }
  std::size_t count_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(b))
    if (entry.is_regular_file()) ++count_b;
  if (bad.empty() && count_b != rel.size()) bad = "file sets differ in size";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu/%zu files byte-identical%s%s", matched,
                rel.size(), bad.empty() ? "" : ", ", bad.c_str());
  report(8, bad.empty() && matched == rel.size() && !rel.empty() ? "PASS" : "FAIL",
         buf);
}

}  // namespace

int main() {
  try {
    criterion_reconstruction();
    criterion_bound_validity();
    criterion_nonvacuity();
    criterion_forgetting();
    criterion_mnist();
    criterion_numerics();
    criterion_metric_identities();
    criterion_determinism();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
