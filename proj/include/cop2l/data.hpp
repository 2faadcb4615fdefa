#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cop2l {

// One training/test point. (task_id, global_index) is the point's identity:
// selection tie-breaks, summation order, and the compression record all key
// on it, so it must be stable across a run and its reconstruction.
struct WeightedExample {
  std::vector<double> x;
  int y = 0;
  double w = 1.0;
  int task_id = 0;
  std::int64_t global_index = 0;
};

inline bool example_id_less(const WeightedExample& a, const WeightedExample& b) {
  if (a.task_id != b.task_id) return a.task_id < b.task_id;
  return a.global_index < b.global_index;
}

// Flat labeled data as ingested from IDX/CSV or synthesized, before task
// splitting. Labels are dense global class ids 0..class_count-1.
struct LabeledDataset {
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  int class_count = 0;

  std::size_t size() const { return xs.size(); }
};

enum class Scenario { kClassIncremental, kTaskIncremental, kDomainIncremental };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kClassIncremental: return "class_incremental";
    case Scenario::kTaskIncremental: return "task_incremental";
    case Scenario::kDomainIncremental: return "domain_incremental";
  }
  throw std::logic_error("scenario_name: unknown scenario");
}

inline Scenario scenario_from_name(const std::string& name) {
  if (name == "class_incremental") return Scenario::kClassIncremental;
  if (name == "task_incremental") return Scenario::kTaskIncremental;
  if (name == "domain_incremental") return Scenario::kDomainIncremental;
  throw std::invalid_argument("unknown scenario: " + name);
}

struct TaskDataset {
  std::vector<WeightedExample> train;
  std::vector<WeightedExample> test;
  std::vector<int> label_set;  // sorted ascending
};

struct TaskStream {
  Scenario scenario = Scenario::kClassIncremental;
  int input_dim = 0;
  int class_count = 0;
  std::vector<TaskDataset> tasks;

  int task_count() const { return static_cast<int>(tasks.size()); }

  const TaskDataset& task(int task_id) const {  // 1-based
    if (task_id < 1 || task_id > task_count())
      throw std::out_of_range("task id out of range");
    return tasks[static_cast<std::size_t>(task_id - 1)];
  }
};

}  // namespace cop2l
