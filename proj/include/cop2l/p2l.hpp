#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cop2l/bounds.hpp"
#include "cop2l/data.hpp"
#include "cop2l/model.hpp"

namespace cop2l {

using ExampleId = std::pair<int, std::int64_t>;

inline ExampleId id_of(const WeightedExample& e) { return {e.task_id, e.global_index}; }

struct MP2LConfig {
  double gamma = 0.6931471805599453;  // -ln(1/2): the binary decision boundary
  int block_size = 1;
  std::uint64_t max_iterations = std::numeric_limits<std::uint64_t>::max();
  double delta = 0.05;
  bool early_stopping = true;
  // Replay mode: run exactly this many iterations, ignoring the stopping
  // threshold and the checkpoint search. Reconstruction uses it to rebuild a
  // recorded trajectory from iteration counts alone.
  std::optional<std::uint64_t> exact_iterations;
};

struct P2LOutcome {
  ParameterVector params;
  std::vector<WeightedExample> compression_set;  // insertion order
  std::uint64_t iterations_run = 0;
  std::uint64_t selected_iteration = 0;
  double bound_at_selected = 1.0;
};

// True iff every point outside the compression set has weighted
// cross-entropy strictly below gamma; an empty complement passes vacuously.
// A weight-omega buffer point therefore needs raw loss below gamma/omega.
inline bool weighted_stop_satisfied(const Model& model, const ParameterVector& theta,
                                    const std::vector<WeightedExample>& s_star,
                                    const std::set<ExampleId>& compression_ids,
                                    double gamma) {
  for (const auto& e : s_star) {
    if (compression_ids.count(id_of(e)) != 0) continue;
    if (!(model.ce_loss(theta, e) * e.w < gamma)) return false;
  }
  return true;
}

// Greedy sample-compression loop on unweighted data: repeatedly move the
// worst-loss point into the compression set and retrain on it, until every
// remaining point is classified with loss below gamma. Ties in the argmax go
// to the smallest (task_id, global_index).
inline P2LOutcome p2l(const Model& model, const ParameterVector& params0,
                      const std::vector<WeightedExample>& s, double gamma) {
  if (s.empty()) throw std::invalid_argument("p2l: empty dataset");
  if (!(gamma > 0.0)) throw std::invalid_argument("p2l: gamma must be positive");

  P2LOutcome out;
  out.params = params0;
  std::set<ExampleId> in_c;
  while (true) {
    const WeightedExample* worst = nullptr;
    double worst_loss = -std::numeric_limits<double>::infinity();
    for (const auto& e : s) {
      if (in_c.count(id_of(e)) != 0) continue;
      double loss = model.ce_loss(out.params, e);
      if (loss > worst_loss ||
          (loss == worst_loss && worst != nullptr && id_of(e) < id_of(*worst))) {
        worst = &e;
        worst_loss = loss;
      }
    }
    if (worst == nullptr || worst_loss < gamma) break;
    out.compression_set.push_back(*worst);
    in_c.insert(id_of(*worst));
    out.params = model.update(out.params, out.compression_set);
    ++out.iterations_run;
  }
  out.selected_iteration = out.iterations_run;
  return out;
}

namespace detail {

// Generalization bound of one mp2l checkpoint: the compression bound over
// the fresh task only, with 0-1 loss on the fresh points outside the
// compression set. Degenerate checkpoints (empty complement) report 1.
inline double checkpoint_bound(const Model& model, const ParameterVector& theta,
                               const std::vector<WeightedExample>& fresh,
                               const std::set<ExampleId>& compression_ids,
                               double delta) {
  std::uint64_t selected = 0;
  double wrong = 0.0;
  std::uint64_t complement = 0;
  for (const auto& e : fresh) {
    if (compression_ids.count(id_of(e)) != 0) {
      ++selected;
      continue;
    }
    wrong += model.zero_one(theta, e);
    ++complement;
  }
  if (complement == 0) return 1.0;
  double loss = wrong / static_cast<double>(complement);
  return compression_bound(static_cast<std::uint64_t>(fresh.size()), selected, loss,
                           delta);
}

inline void trace_row(std::ostream* trace, std::uint64_t iteration,
                      std::size_t compression_size, double max_weighted_loss,
                      double bound) {
  if (trace == nullptr) return;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%llu,%zu,%.17g,%.17g\n",
                static_cast<unsigned long long>(iteration), compression_size,
                max_weighted_loss, bound);
  *trace << buf;
}

}  // namespace detail

// Weighted block variant of the compression loop. Selection ranks all
// points outside the compression set by weighted cross-entropy and moves the
// top block_size of them in per iteration; the stopping check uses the
// single worst point. A run that halts at the threshold before hitting the
// iteration cap searches every checkpoint (including the untrained one) for
// the smallest fresh-task bound and returns that checkpoint; capped runs and
// replays keep the final iterate.
inline P2LOutcome mp2l(const Model& model, const ParameterVector& params0,
                       const std::vector<WeightedExample>& fresh,
                       const std::vector<WeightedExample>& buffer,
                       const MP2LConfig& cfg, std::ostream* trace = nullptr) {
  if (fresh.empty()) throw std::invalid_argument("mp2l: empty fresh task");
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("mp2l: gamma must be positive");
  if (cfg.block_size < 1) throw std::invalid_argument("mp2l: block_size must be >= 1");
  if (cfg.max_iterations < 1)
    throw std::invalid_argument("mp2l: max_iterations must be >= 1");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
    throw std::invalid_argument("mp2l: delta must be in (0, 1)");

  std::vector<WeightedExample> s_star;
  s_star.reserve(fresh.size() + buffer.size());
  std::set<ExampleId> seen;
  for (const auto& e : fresh) {
    if (!seen.insert(id_of(e)).second)
      throw std::invalid_argument("mp2l: duplicate example identity");
    s_star.push_back(e);
  }
  for (const auto& e : buffer) {
    if (!seen.insert(id_of(e)).second)
      throw std::invalid_argument("mp2l: fresh and buffer sets must be disjoint");
    s_star.push_back(e);
  }

  if (trace != nullptr) *trace << "iteration,compression_size,max_weighted_loss,bound\n";

  ParameterVector theta = params0;
  std::vector<WeightedExample> compression;
  std::set<ExampleId> in_c;
  std::vector<ParameterVector> checkpoint_params = {params0};
  std::vector<std::size_t> checkpoint_sizes = {0};
  std::uint64_t iterations = 0;
  bool stopped_at_threshold = false;

  struct Candidate {
    double weighted_loss;
    std::size_t index;
  };
  std::vector<Candidate> candidates;

  while (true) {
    candidates.clear();
    double max_weighted = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s_star.size(); ++i) {
      const auto& e = s_star[i];
      if (in_c.count(id_of(e)) != 0) continue;
      double wl = model.ce_loss(theta, e) * e.w;
      candidates.push_back({wl, i});
      max_weighted = std::max(max_weighted, wl);
    }
    detail::trace_row(trace, iterations, compression.size(), max_weighted,
                      detail::checkpoint_bound(model, theta, fresh, in_c, cfg.delta));

    if (cfg.exact_iterations.has_value()) {
      if (iterations == *cfg.exact_iterations || candidates.empty()) break;
    } else {
      if (candidates.empty() || max_weighted < cfg.gamma) {
        stopped_at_threshold = true;
        break;
      }
      if (iterations == cfg.max_iterations) break;
    }

    std::size_t take = std::min(static_cast<std::size_t>(cfg.block_size),
                                candidates.size());
    std::sort(candidates.begin(), candidates.end(),
              [&](const Candidate& a, const Candidate& b) {
                if (a.weighted_loss != b.weighted_loss)
                  return a.weighted_loss > b.weighted_loss;
                return id_of(s_star[a.index]) < id_of(s_star[b.index]);
              });
    for (std::size_t i = 0; i < take; ++i) {
      const auto& e = s_star[candidates[i].index];
      compression.push_back(e);
      in_c.insert(id_of(e));
    }
    theta = model.update(theta, compression);
    ++iterations;
    checkpoint_params.push_back(theta);
    checkpoint_sizes.push_back(compression.size());
  }

  P2LOutcome out;
  out.iterations_run = iterations;

  bool search = !cfg.exact_iterations.has_value() && cfg.early_stopping &&
                stopped_at_threshold && iterations < cfg.max_iterations;
  if (search) {
    std::set<ExampleId> prefix_ids;
    std::size_t consumed = 0;
    std::uint64_t best = 0;
    double best_bound = std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k <= iterations; ++k) {
      while (consumed < checkpoint_sizes[static_cast<std::size_t>(k)]) {
        prefix_ids.insert(id_of(compression[consumed]));
        ++consumed;
      }
      double b = detail::checkpoint_bound(
          model, checkpoint_params[static_cast<std::size_t>(k)], fresh, prefix_ids,
          cfg.delta);
      if (b < best_bound) {
        best_bound = b;
        best = k;
      }
    }
    out.selected_iteration = best;
    out.params = checkpoint_params[static_cast<std::size_t>(best)];
    out.compression_set.assign(
        compression.begin(),
        compression.begin() +
            static_cast<std::ptrdiff_t>(checkpoint_sizes[static_cast<std::size_t>(best)]));
    out.bound_at_selected = best_bound;
  } else {
    out.selected_iteration = iterations;
    out.params = theta;
    out.compression_set = compression;
    out.bound_at_selected =
        detail::checkpoint_bound(model, theta, fresh, in_c, cfg.delta);
  }
  return out;
}

}  // namespace cop2l
