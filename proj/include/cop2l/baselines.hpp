#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "cop2l/buffer.hpp"
#include "cop2l/cop2l.hpp"
#include "cop2l/data.hpp"
#include "cop2l/metrics.hpp"
#include "cop2l/model.hpp"
#include "cop2l/rng.hpp"
#include "cop2l/tasks.hpp"

namespace cop2l {

enum class BaselineKind { kFinetune, kReplay };

inline const char* baseline_name(BaselineKind kind) {
  return kind == BaselineKind::kFinetune ? "finetune" : "replay";
}

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kFinetune;
  std::uint64_t buffer_capacity = 0;
  std::uint64_t buffer_seed = 0;
};

struct BaselineResult {
  ParameterVector params;
  std::vector<ParameterVector> task_params;
  AccuracyMatrix accuracy;
  std::vector<std::vector<std::size_t>> pool_sizes;
};

// Reference training loops on the same deterministic learner. Finetuning
// minimizes the plain empirical loss of each task in sequence. Experience
// replay adds the mean loss over a buffer of earlier tasks' points: the
// combined update weights fresh points by N/n_t and buffered points by N/|B|
// so that one weighted mean over all N points realizes the sum of the two
// means. The buffer keeps floor(m/t) uniformly sampled points per seen task,
// drawn from the full training set with one dedicated stream per task.
inline BaselineResult run_baseline(const TaskStream& stream,
                                   const LearnerConfig& lcfg,
                                   const BaselineConfig& bcfg) {
  const bool replay = bcfg.kind == BaselineKind::kReplay;
  if (replay && bcfg.buffer_capacity < 1)
    throw std::invalid_argument("baseline: replay needs buffer_capacity >= 1");
  Model model = make_model(stream, lcfg);
  validate_stream(stream);
  const int task_count = stream.task_count();

  BaselineResult result;
  std::map<int, std::vector<WeightedExample>> pools;
  ParameterVector theta = model.init_params();

  for (int t = 1; t <= task_count; ++t) {
    const auto& fresh = stream.task(t).train;
    std::vector<WeightedExample> buffer;
    for (const auto& [task_id, pool] : pools)
      buffer.insert(buffer.end(), pool.begin(), pool.end());

    std::vector<WeightedExample> batch;
    batch.reserve(fresh.size() + buffer.size());
    if (buffer.empty()) {
      batch = fresh;
    } else {
      double n = static_cast<double>(fresh.size() + buffer.size());
      for (WeightedExample e : fresh) {
        e.w = n / static_cast<double>(fresh.size());
        batch.push_back(e);
      }
      for (WeightedExample e : buffer) {
        e.w = n / static_cast<double>(buffer.size());
        batch.push_back(e);
      }
    }
    theta = model.update(theta, batch);
    result.task_params.push_back(theta);

    if (replay) {
      const std::uint64_t quota =
          bcfg.buffer_capacity / static_cast<std::uint64_t>(t);
      SeededStream rng(bcfg.buffer_seed, "baseline-buffer",
                       static_cast<std::uint64_t>(t));
      for (auto& [task_id, pool] : pools)
        pool = sample_without_replacement(pool, quota, rng);
      pools[t] = sample_without_replacement(fresh, quota, rng);
      std::vector<std::size_t> sizes;
      for (const auto& [task_id, pool] : pools) sizes.push_back(pool.size());
      result.pool_sizes.push_back(std::move(sizes));
    }

    std::vector<double> row;
    for (int tau = 1; tau <= t; ++tau) {
      const auto& test = stream.task(tau).test;
      row.push_back(test.empty() ? 0.0 : dataset_accuracy(model, theta, test));
    }
    result.accuracy.append_row(row);
  }

  result.params = theta;
  return result;
}

}  // namespace cop2l
