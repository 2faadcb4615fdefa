#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cop2l/bounds.hpp"
#include "cop2l/buffer.hpp"
#include "cop2l/data.hpp"
#include "cop2l/errors.hpp"
#include "cop2l/metrics.hpp"
#include "cop2l/model.hpp"
#include "cop2l/p2l.hpp"
#include "cop2l/rng.hpp"
#include "cop2l/tasks.hpp"

namespace cop2l {

struct CoP2LConfig {
  double gamma = 0.6931471805599453;
  double omega = 1.0;
  std::uint64_t buffer_capacity = 0;
  int block_size = 1;
  double delta = 0.05;
  bool early_stopping = true;
  std::uint64_t max_iterations = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t buffer_seed = 0;
};

// Per-task slice of the compression record. `si` holds training indices that
// are in the final compression set, `sj` holds indices that were selected and
// later evicted from the replay pools, and `mu1` maps every `sj` index to the
// task at which its eviction happened. Indices refer to positions in the
// owning task's training set and are kept sorted ascending.
struct TaskRecordEntry {
  std::vector<std::int64_t> si;
  std::vector<std::int64_t> sj;
  std::map<std::int64_t, int> mu1;
};

// Everything needed to rebuild the final parameters from the task stream:
// the per-task index sets plus the per-task selected iteration counts.
struct CompressionRecord {
  std::vector<TaskRecordEntry> tasks;
  std::vector<std::uint64_t> mu2;
};

struct CoP2LResult {
  ParameterVector params;
  std::vector<ParameterVector> task_params;
  AccuracyMatrix accuracy;
  CompressionRecord record;
  std::vector<Certificate> certificates;
  std::vector<std::uint64_t> iterations_run;
  std::vector<std::vector<std::size_t>> pool_sizes;
  std::map<int, std::vector<std::int64_t>> final_pool_indices;
};

struct ReconstructionResult {
  ParameterVector params;
  std::vector<ParameterVector> task_params;
  std::vector<Certificate> certificates;
  std::vector<TaskRecordEntry> rebuilt_tasks;
};

// Builds the learner for a stream: task-incremental streams get one head per
// task over that task's label set, everything else shares a single head.
inline Model make_model(const TaskStream& stream, const LearnerConfig& lcfg) {
  if (lcfg.input_dim != stream.input_dim)
    throw std::invalid_argument("cop2l: learner input_dim does not match the stream");
  if (lcfg.class_count != stream.class_count)
    throw std::invalid_argument(
        "cop2l: learner class_count does not match the stream");
  if (stream.scenario == Scenario::kTaskIncremental) {
    std::vector<std::vector<int>> label_sets;
    for (int t = 1; t <= stream.task_count(); ++t) {
      const auto& labels = stream.task(t).label_set;
      label_sets.emplace_back(labels.begin(), labels.end());
    }
    return Model::per_task(lcfg, std::move(label_sets));
  }
  return Model::single_head(lcfg);
}

namespace detail {

// Mutable view of the record while tasks are processed: one index set pair
// and one removal map per task.
struct Bookkeeping {
  std::vector<std::set<std::int64_t>> si;
  std::vector<std::set<std::int64_t>> sj;
  std::vector<std::map<std::int64_t, int>> mu1;

  explicit Bookkeeping(int task_count)
      : si(static_cast<std::size_t>(task_count)),
        sj(static_cast<std::size_t>(task_count)),
        mu1(static_cast<std::size_t>(task_count)) {}
};

// Risk certificate for task `tau` at the checkpoint reached after task
// `upto`. The empirical term is the zero-one loss on the part of task tau's
// training set that is outside both index sets; when nothing is left out the
// bound is vacuous. Training and replay both call this, so their
// certificates agree bit for bit.
inline Certificate make_checkpoint_certificate(
    const Model& model, const ParameterVector& theta, const TaskStream& stream,
    int tau, int upto, const Bookkeeping& book,
    const std::vector<std::uint64_t>& mu2, double delta) {
  const auto& train = stream.task(tau).train;
  const auto& si = book.si[static_cast<std::size_t>(tau - 1)];
  const auto& sj = book.sj[static_cast<std::size_t>(tau - 1)];

  Certificate cert;
  cert.task_id = tau;
  cert.T = upto;
  cert.n_t = train.size();
  cert.i_size = si.size();
  cert.j_size = sj.size();
  cert.mu2.assign(mu2.begin(), mu2.begin() + upto);
  cert.delta = delta;

  std::uint64_t complement = 0;
  double wrong = 0.0;
  for (const auto& e : train) {
    if (si.count(e.global_index) != 0 || sj.count(e.global_index) != 0) continue;
    ++complement;
    wrong += model.zero_one(theta, e);
  }
  if (complement == 0) {
    cert.complement_loss = 0.0;
    cert.bound = 1.0;
  } else {
    cert.complement_loss = wrong / static_cast<double>(complement);
    cert.bound = evaluate_certificate(cert);
  }
  return cert;
}

inline MP2LConfig inner_config(const CoP2LConfig& ccfg) {
  MP2LConfig mcfg;
  mcfg.gamma = ccfg.gamma;
  mcfg.block_size = ccfg.block_size;
  mcfg.max_iterations = ccfg.max_iterations;
  mcfg.delta = ccfg.delta;
  mcfg.early_stopping = ccfg.early_stopping;
  return mcfg;
}

inline void check_cop2l_config(const CoP2LConfig& ccfg) {
  if (!(ccfg.omega >= 1.0))
    throw std::invalid_argument("cop2l: omega must be >= 1");
}

inline std::vector<WeightedExample> concat_pools(
    const std::map<int, std::vector<WeightedExample>>& pools) {
  std::vector<WeightedExample> buffer;
  for (const auto& [task_id, pool] : pools)
    buffer.insert(buffer.end(), pool.begin(), pool.end());
  return buffer;
}

inline std::vector<TaskRecordEntry> freeze_record(const Bookkeeping& book) {
  std::vector<TaskRecordEntry> tasks;
  tasks.reserve(book.si.size());
  for (std::size_t t = 0; t < book.si.size(); ++t) {
    TaskRecordEntry entry;
    entry.si.assign(book.si[t].begin(), book.si[t].end());
    entry.sj.assign(book.sj[t].begin(), book.sj[t].end());
    entry.mu1 = book.mu1[t];
    tasks.push_back(std::move(entry));
  }
  return tasks;
}

}  // namespace detail

// Continual compression loop. Each task is compressed with the weighted
// block learner against a replay buffer of earlier tasks' points, the
// selected points are folded into the per-task index sets, and the buffer is
// resampled down to an equal per-task quota. Points that were selected and
// later evicted move to the j-sets together with their removal task, which
// is what makes the record replayable without the evicted points' history.
// `trace_for_task` may supply a stream per task id for iteration traces.
inline CoP2LResult cop2l_train(
    const TaskStream& stream, const LearnerConfig& lcfg, const CoP2LConfig& ccfg,
    const std::function<std::ostream*(int)>& trace_for_task = {}) {
  detail::check_cop2l_config(ccfg);
  Model model = make_model(stream, lcfg);
  validate_stream(stream);
  const int task_count = stream.task_count();

  CoP2LResult result;
  detail::Bookkeeping book(task_count);
  std::map<int, std::vector<WeightedExample>> pools;
  ParameterVector theta = model.init_params();

  for (int t = 1; t <= task_count; ++t) {
    const auto& fresh = stream.task(t).train;
    std::vector<WeightedExample> buffer = detail::concat_pools(pools);
    std::ostream* trace = trace_for_task ? trace_for_task(t) : nullptr;

    auto out = mp2l(model, theta, fresh, buffer, detail::inner_config(ccfg), trace);
    theta = out.params;
    result.task_params.push_back(theta);
    result.record.mu2.push_back(out.selected_iteration);
    result.iterations_run.push_back(out.iterations_run);

    std::set<std::int64_t> fresh_selected;
    for (const auto& e : out.compression_set) {
      book.si[static_cast<std::size_t>(e.task_id - 1)].insert(e.global_index);
      if (e.task_id == t) fresh_selected.insert(e.global_index);
    }

    // Buffer maintenance draws from one dedicated stream per task: first the
    // old pools are resampled down to the new quota in ascending task order,
    // then this task's pool is drawn from its unselected points.
    const std::uint64_t quota = ccfg.buffer_capacity / static_cast<std::uint64_t>(t);
    SeededStream rng(ccfg.buffer_seed, "buffer", static_cast<std::uint64_t>(t));
    std::vector<std::pair<int, std::vector<WeightedExample>>> evicted;
    for (auto& [task_id, pool] : pools) {
      std::vector<WeightedExample> kept = sample_without_replacement(pool, quota, rng);
      std::vector<WeightedExample> dropped;
      std::size_t k = 0;
      for (const auto& e : pool) {
        if (k < kept.size() && kept[k].global_index == e.global_index) {
          ++k;
          continue;
        }
        dropped.push_back(e);
      }
      evicted.emplace_back(task_id, std::move(dropped));
      pool = std::move(kept);
    }
    std::vector<WeightedExample> candidates;
    for (const auto& e : fresh) {
      if (fresh_selected.count(e.global_index) != 0) continue;
      WeightedExample b = e;
      b.w = ccfg.omega;
      candidates.push_back(b);
    }
    pools[t] = sample_without_replacement(std::move(candidates), quota, rng);

    // Eviction bookkeeping runs after the pools settle: any dropped point
    // that sits in an i-set moves to the j-set with this task as its removal
    // task. Points that were never selected leave no trace.
    for (const auto& [task_id, dropped] : evicted) {
      auto& si = book.si[static_cast<std::size_t>(task_id - 1)];
      for (const auto& e : dropped) {
        if (si.erase(e.global_index) == 0) continue;
        book.sj[static_cast<std::size_t>(task_id - 1)].insert(e.global_index);
        book.mu1[static_cast<std::size_t>(task_id - 1)][e.global_index] = t;
      }
    }

    std::vector<std::size_t> sizes;
    for (const auto& [task_id, pool] : pools) sizes.push_back(pool.size());
    result.pool_sizes.push_back(std::move(sizes));

    // Checkpoint metrics and certificates for every task seen so far. Tasks
    // without test data score zero rather than failing the whole run.
    std::vector<double> row;
    for (int tau = 1; tau <= t; ++tau) {
      const auto& test = stream.task(tau).test;
      row.push_back(test.empty() ? 0.0 : dataset_accuracy(model, theta, test));
    }
    result.accuracy.append_row(row);
    for (int tau = 1; tau <= t; ++tau)
      result.certificates.push_back(detail::make_checkpoint_certificate(
          model, theta, stream, tau, t, book, result.record.mu2, ccfg.delta));
  }

  result.params = theta;
  result.record.tasks = detail::freeze_record(book);
  for (const auto& [task_id, pool] : pools) {
    auto& indices = result.final_pool_indices[task_id];
    for (const auto& e : pool) indices.push_back(e.global_index);
  }
  return result;
}

namespace detail {

// Structural validation of a record against a stream. Throws
// RecordIncompatibleError on anything a faithful training run cannot emit;
// content-level tampering that keeps the structure intact is caught later by
// comparing the replayed record and certificates against the originals.
inline void check_record_structure(const TaskStream& stream,
                                   const CompressionRecord& record) {
  const std::size_t task_count = static_cast<std::size_t>(stream.task_count());
  if (record.tasks.size() != task_count)
    throw RecordIncompatibleError("record: task entry count does not match stream");
  if (record.mu2.size() != task_count)
    throw RecordIncompatibleError("record: iteration count list does not match stream");
  for (std::size_t t = 0; t < task_count; ++t) {
    const auto& entry = record.tasks[t];
    std::set<std::int64_t> valid;
    for (const auto& e : stream.task(static_cast<int>(t) + 1).train)
      valid.insert(e.global_index);
    std::set<std::int64_t> si(entry.si.begin(), entry.si.end());
    std::set<std::int64_t> sj(entry.sj.begin(), entry.sj.end());
    if (si.size() != entry.si.size() || sj.size() != entry.sj.size())
      throw RecordIncompatibleError("record: duplicate training index");
    for (std::int64_t idx : entry.si)
      if (valid.count(idx) == 0)
        throw RecordIncompatibleError("record: i-set index outside the task");
    for (std::int64_t idx : entry.sj) {
      if (valid.count(idx) == 0)
        throw RecordIncompatibleError("record: j-set index outside the task");
      if (si.count(idx) != 0)
        throw RecordIncompatibleError("record: index in both i-set and j-set");
    }
    if (entry.mu1.size() != entry.sj.size())
      throw RecordIncompatibleError("record: removal map does not cover the j-set");
    for (const auto& [idx, removal_task] : entry.mu1) {
      if (sj.count(idx) == 0)
        throw RecordIncompatibleError("record: removal entry for a non j-set index");
      if (removal_task <= static_cast<int>(t) + 1 ||
          removal_task > static_cast<int>(task_count))
        throw RecordIncompatibleError("record: removal task out of range");
    }
  }
}

}  // namespace detail

// Rebuilds the final parameters from a compression record by replaying the
// training run on the recorded points alone. The replay consumes no
// randomness: fresh sets are the recorded i-set points, pools are the
// recorded points with the buffer weight, and evictions follow the recorded
// removal tasks. A faithful record reproduces the trained parameters bit for
// bit; the rebuilt record and certificates expose tampering.
inline ReconstructionResult reconstruct(const TaskStream& stream,
                                        const LearnerConfig& lcfg,
                                        const CoP2LConfig& ccfg,
                                        const CompressionRecord& record) {
  detail::check_cop2l_config(ccfg);
  Model model = make_model(stream, lcfg);
  validate_stream(stream);
  detail::check_record_structure(stream, record);
  const int task_count = stream.task_count();

  ReconstructionResult result;
  detail::Bookkeeping book(task_count);
  std::map<int, std::vector<WeightedExample>> pools;
  ParameterVector theta = model.init_params();

  for (int t = 1; t <= task_count; ++t) {
    const auto& train = stream.task(t).train;
    const auto& entry = record.tasks[static_cast<std::size_t>(t - 1)];
    std::map<std::int64_t, const WeightedExample*> by_index;
    for (const auto& e : train) by_index.emplace(e.global_index, &e);

    std::vector<WeightedExample> fresh;
    fresh.reserve(entry.si.size());
    for (std::int64_t idx : entry.si) fresh.push_back(*by_index.at(idx));

    P2LOutcome out;
    if (fresh.empty()) {
      if (record.mu2[static_cast<std::size_t>(t - 1)] != 0)
        throw RecordIncompatibleError(
            "record: iterations recorded for a task with no compression points");
      out.params = theta;
    } else {
      std::vector<WeightedExample> buffer = detail::concat_pools(pools);
      MP2LConfig mcfg = detail::inner_config(ccfg);
      mcfg.exact_iterations = record.mu2[static_cast<std::size_t>(t - 1)];
      out = mp2l(model, theta, fresh, buffer, mcfg);
      theta = out.params;
    }
    result.task_params.push_back(theta);

    std::set<std::int64_t> fresh_selected;
    for (const auto& e : out.compression_set) {
      book.si[static_cast<std::size_t>(e.task_id - 1)].insert(e.global_index);
      if (e.task_id == t) fresh_selected.insert(e.global_index);
    }

    // This task's replay pool: recorded compression points that were not
    // consumed this round, plus all of the later-evicted points, at the
    // buffer weight. Everything a later task can select is in here.
    std::vector<WeightedExample> pool;
    for (std::int64_t idx : entry.si) {
      if (fresh_selected.count(idx) != 0) continue;
      WeightedExample b = *by_index.at(idx);
      b.w = ccfg.omega;
      pool.push_back(b);
    }
    for (std::int64_t idx : entry.sj) {
      WeightedExample b = *by_index.at(idx);
      b.w = ccfg.omega;
      pool.push_back(b);
    }
    std::sort(pool.begin(), pool.end(), example_id_less);
    pools[t] = std::move(pool);

    // Apply the recorded evictions for this task: drop every point whose
    // removal task is t from its pool and mirror the i-set to j-set move.
    for (int i = 1; i <= t; ++i) {
      const auto& mu1 = record.tasks[static_cast<std::size_t>(i - 1)].mu1;
      auto& pool_i = pools[i];
      pool_i.erase(std::remove_if(pool_i.begin(), pool_i.end(),
                                  [&](const WeightedExample& e) {
                                    auto it = mu1.find(e.global_index);
                                    return it != mu1.end() && it->second == t;
                                  }),
                   pool_i.end());
      for (const auto& [idx, removal_task] : mu1) {
        if (removal_task != t) continue;
        auto& si = book.si[static_cast<std::size_t>(i - 1)];
        if (si.erase(idx) == 0) continue;
        book.sj[static_cast<std::size_t>(i - 1)].insert(idx);
        book.mu1[static_cast<std::size_t>(i - 1)][idx] = t;
      }
    }

    for (int tau = 1; tau <= t; ++tau)
      result.certificates.push_back(detail::make_checkpoint_certificate(
          model, theta, stream, tau, t, book, record.mu2, ccfg.delta));
  }

  result.params = theta;
  result.rebuilt_tasks = detail::freeze_record(book);
  return result;
}

}  // namespace cop2l
