#pragma once

#include <stdexcept>
#include <vector>

#include "cop2l/data.hpp"
#include "cop2l/model.hpp"

namespace cop2l {

// Lower-triangular accuracy matrix: row T' holds the accuracies of the
// checkpoint taken after task T' on the test sets of tasks 1..T'. Access is
// 1-based to match task ids everywhere else.
class AccuracyMatrix {
 public:
  void append_row(const std::vector<double>& row) {
    if (row.size() != rows_.size() + 1)
      throw std::invalid_argument("accuracy matrix: row " +
                                  std::to_string(rows_.size() + 1) + " needs " +
                                  std::to_string(rows_.size() + 1) + " entries");
    for (double v : row)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("accuracy matrix: entries must be in [0, 1]");
    rows_.push_back(row);
  }

  int row_count() const { return static_cast<int>(rows_.size()); }

  double at(int checkpoint_task, int task) const {
    if (checkpoint_task < 1 || checkpoint_task > row_count())
      throw std::out_of_range("accuracy matrix: checkpoint row out of range");
    if (task < 1 || task > checkpoint_task)
      throw std::out_of_range("accuracy matrix: task column out of range");
    return rows_[static_cast<std::size_t>(checkpoint_task - 1)]
                [static_cast<std::size_t>(task - 1)];
  }

 private:
  std::vector<std::vector<double>> rows_;
};

namespace detail {

inline void check_rows(const AccuracyMatrix& m, int upto, const char* what) {
  if (upto < 1 || upto > m.row_count())
    throw std::invalid_argument(std::string(what) + ": checkpoint row incomplete");
}

}  // namespace detail

// Mean accuracy of checkpoint `upto` across tasks 1..upto.
inline double average_accuracy(const AccuracyMatrix& m, int upto) {
  detail::check_rows(m, upto, "average_accuracy");
  double sum = 0.0;
  for (int t = 1; t <= upto; ++t) sum += m.at(upto, t);
  return sum / upto;
}

// Mean drop from each old task's immediate accuracy to its accuracy under
// checkpoint `upto`. Negative values mean backward transfer and are legal.
inline double average_forgetting(const AccuracyMatrix& m, int upto) {
  detail::check_rows(m, upto, "average_forgetting");
  if (upto < 2)
    throw std::domain_error("average_forgetting: undefined before the second task");
  double sum = 0.0;
  for (int t = 1; t < upto; ++t) sum += m.at(t, t) - m.at(upto, t);
  return sum / (upto - 1);
}

// Mean immediate (diagonal) accuracy through task `upto`.
inline double plasticity(const AccuracyMatrix& m, int upto) {
  detail::check_rows(m, upto, "plasticity");
  double sum = 0.0;
  for (int t = 1; t <= upto; ++t) sum += m.at(t, t);
  return sum / upto;
}

// Fraction of examples the model classifies correctly, using the same
// prediction tie-break as the 0-1 loss so metrics and bounds agree.
inline double dataset_accuracy(const Model& model, const ParameterVector& theta,
                               const std::vector<WeightedExample>& examples) {
  if (examples.empty())
    throw std::invalid_argument("dataset_accuracy: empty example list");
  double wrong = 0.0;
  for (const auto& e : examples) wrong += model.zero_one(theta, e);
  return 1.0 - wrong / static_cast<double>(examples.size());
}

// Published full-scale results for the five-task class-incremental MNIST MLP
// configuration, kept for report context only; desk-scale runs are not
// expected to reproduce them.
inline constexpr double kMnistFiveTaskReferenceAccuracy = 95.12;
inline constexpr double kMnistFiveTaskReferenceForgetting = 3.35;

}  // namespace cop2l
