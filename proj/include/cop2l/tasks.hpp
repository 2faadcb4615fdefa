#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cop2l/data.hpp"
#include "cop2l/errors.hpp"
#include "cop2l/rng.hpp"

namespace cop2l {

// Checks the structural contracts every factory below must deliver: label
// sets disjoint for class/task-incremental streams and identical for
// domain-incremental ones, labels inside the owning task's set, unique
// global indices, and consistent dimensions/ownership.
inline void validate_stream(const TaskStream& s) {
  if (s.tasks.empty()) throw std::invalid_argument("stream: no tasks");
  if (s.input_dim < 1) throw std::invalid_argument("stream: input_dim must be >= 1");
  std::set<int> all_labels;
  for (std::size_t ti = 0; ti < s.tasks.size(); ++ti) {
    const TaskDataset& task = s.tasks[ti];
    int task_id = static_cast<int>(ti) + 1;
    if (task.train.empty()) throw std::invalid_argument("stream: empty training set");
    if (task.label_set.empty() ||
        !std::is_sorted(task.label_set.begin(), task.label_set.end()))
      throw std::invalid_argument("stream: label sets must be sorted and non-empty");
    for (int c : task.label_set) {
      if (c < 0 || c >= s.class_count)
        throw std::invalid_argument("stream: label outside class range");
      if (s.scenario != Scenario::kDomainIncremental && !all_labels.insert(c).second)
        throw std::invalid_argument("stream: task label sets must be disjoint");
    }
    if (s.scenario == Scenario::kDomainIncremental &&
        task.label_set != s.tasks[0].label_set)
      throw std::invalid_argument(
          "stream: domain-incremental tasks must share one label set");
    std::set<std::int64_t> indices;
    for (const WeightedExample& e : task.train) {
      if (static_cast<int>(e.x.size()) != s.input_dim)
        throw std::invalid_argument("stream: example dimension mismatch");
      if (e.task_id != task_id)
        throw std::invalid_argument("stream: example owned by the wrong task");
      if (!std::binary_search(task.label_set.begin(), task.label_set.end(), e.y))
        throw std::invalid_argument("stream: example label outside the task label set");
      if (!indices.insert(e.global_index).second)
        throw std::invalid_argument("stream: duplicate global index within a task");
    }
    for (const WeightedExample& e : task.test) {
      if (static_cast<int>(e.x.size()) != s.input_dim)
        throw std::invalid_argument("stream: test example dimension mismatch");
      if (e.task_id != task_id)
        throw std::invalid_argument("stream: test example owned by the wrong task");
      if (!std::binary_search(task.label_set.begin(), task.label_set.end(), e.y))
        throw std::invalid_argument("stream: test label outside the task label set");
    }
  }
}

namespace detail {

inline void append_example(TaskDataset& task, const std::vector<double>& x, int y,
                           int task_id, bool is_test) {
  WeightedExample e;
  e.x = x;
  e.y = y;
  e.w = 1.0;
  e.task_id = task_id;
  auto& dst = is_test ? task.test : task.train;
  e.global_index = static_cast<std::int64_t>(dst.size());
  dst.push_back(std::move(e));
}

inline std::vector<int> shuffled_classes(int class_count,
                                         std::optional<std::uint64_t> seed) {
  std::vector<int> order(static_cast<std::size_t>(class_count));
  for (int c = 0; c < class_count; ++c) order[static_cast<std::size_t>(c)] = c;
  if (seed.has_value()) {
    SeededStream rng(*seed, "class-order");
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_below(i + 1));
      std::swap(order[i], order[j]);
    }
  }
  return order;
}

}  // namespace detail

// Partitions a labeled dataset into tasks of `classes_per_task` consecutive
// classes under a seeded class permutation (identity when no seed is given).
// Examples keep their original relative order within each task.
inline TaskStream split_by_class(const LabeledDataset& train, const LabeledDataset& test,
                                 int classes_per_task,
                                 std::optional<std::uint64_t> class_order_seed,
                                 Scenario scenario = Scenario::kClassIncremental) {
  if (classes_per_task < 1)
    throw std::invalid_argument("split_by_class: classes_per_task must be >= 1");
  if (train.class_count < 1 || train.class_count != test.class_count)
    throw std::invalid_argument("split_by_class: train/test class counts disagree");
  if (train.class_count % classes_per_task != 0)
    throw std::invalid_argument(
        "split_by_class: class count not divisible by classes_per_task");
  if (train.size() == 0) throw std::invalid_argument("split_by_class: empty dataset");

  int num_tasks = train.class_count / classes_per_task;
  std::vector<int> order = detail::shuffled_classes(train.class_count, class_order_seed);
  std::vector<int> task_of_class(static_cast<std::size_t>(train.class_count), 0);
  TaskStream s;
  s.scenario = scenario;
  s.input_dim = static_cast<int>(train.xs.empty() ? 0 : train.xs[0].size());
  s.class_count = train.class_count;
  s.tasks.resize(static_cast<std::size_t>(num_tasks));
  for (int t = 0; t < num_tasks; ++t) {
    auto& label_set = s.tasks[static_cast<std::size_t>(t)].label_set;
    for (int k = 0; k < classes_per_task; ++k) {
      int c = order[static_cast<std::size_t>(t * classes_per_task + k)];
      label_set.push_back(c);
      task_of_class[static_cast<std::size_t>(c)] = t;
    }
    std::sort(label_set.begin(), label_set.end());
  }
  auto scatter = [&](const LabeledDataset& d, bool is_test) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      int y = d.ys[i];
      if (y < 0 || y >= train.class_count)
        throw std::invalid_argument("split_by_class: label outside class range");
      int t = task_of_class[static_cast<std::size_t>(y)];
      detail::append_example(s.tasks[static_cast<std::size_t>(t)], d.xs[i], y, t + 1,
                             is_test);
    }
  };
  scatter(train, false);
  scatter(test, true);
  validate_stream(s);
  return s;
}

// Gaussian class clusters: each class mean sits on a seeded random unit
// direction scaled to `separation`, with isotropic noise of the given sigma.
// Train and test are independent draws from the same class-conditional law.
// Zero separation is allowed and produces label-independent inputs.
inline TaskStream synthetic_blobs(int num_tasks, int classes_per_task, int n_per_class,
                                  int n_test_per_class, int dim, double separation,
                                  double noise_sigma, std::uint64_t seed,
                                  Scenario scenario = Scenario::kClassIncremental) {
  if (num_tasks < 1 || classes_per_task < 1 || n_per_class < 1 || dim < 1)
    throw std::invalid_argument("synthetic_blobs: counts must be positive");
  if (n_test_per_class < 0)
    throw std::invalid_argument("synthetic_blobs: negative test count");
  if (separation < 0.0 || noise_sigma < 0.0)
    throw std::invalid_argument("synthetic_blobs: negative separation or noise");

  int class_count = num_tasks * classes_per_task;
  TaskStream s;
  s.scenario = scenario;
  s.input_dim = dim;
  s.class_count = class_count;
  s.tasks.resize(static_cast<std::size_t>(num_tasks));

  for (int c = 0; c < class_count; ++c) {
    std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
    SeededStream dir_rng(seed, "blob-mean", static_cast<std::uint64_t>(c));
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (double& v : mean) {
        v = dir_rng.gaussian();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    for (double& v : mean) v = v / norm * separation;

    int t = c / classes_per_task;
    TaskDataset& task = s.tasks[static_cast<std::size_t>(t)];
    task.label_set.push_back(c);

    SeededStream train_rng(seed, "blob-train", static_cast<std::uint64_t>(c));
    SeededStream test_rng(seed, "blob-test", static_cast<std::uint64_t>(c));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int i = 0; i < n_per_class; ++i) {
      for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = mean[j] + noise_sigma * train_rng.gaussian();
      detail::append_example(task, x, c, t + 1, false);
    }
    for (int i = 0; i < n_test_per_class; ++i) {
      for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = mean[j] + noise_sigma * test_rng.gaussian();
      detail::append_example(task, x, c, t + 1, true);
    }
  }
  validate_stream(s);
  return s;
}

inline std::vector<double> permute_vector(const std::vector<double>& x,
                                          const std::vector<std::size_t>& perm) {
  if (perm.size() != x.size())
    throw std::invalid_argument("permute_vector: permutation length mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[perm[i]];
  return out;
}

namespace detail {

inline std::vector<int> sorted_unique_labels(const LabeledDataset& train,
                                             const LabeledDataset& test) {
  std::set<int> labels(train.ys.begin(), train.ys.end());
  labels.insert(test.ys.begin(), test.ys.end());
  return std::vector<int>(labels.begin(), labels.end());
}

}  // namespace detail

// Domain-incremental stream: task 1 is the base data unchanged; each later
// task applies one fixed seeded feature permutation to every input. Labels
// are untouched.
inline TaskStream permute_features(const LabeledDataset& train, const LabeledDataset& test,
                                   int num_tasks, std::uint64_t seed) {
  if (num_tasks < 1) throw std::invalid_argument("permute_features: need >= 1 task");
  if (train.size() == 0) throw std::invalid_argument("permute_features: empty dataset");
  std::size_t dim = train.xs[0].size();

  TaskStream s;
  s.scenario = Scenario::kDomainIncremental;
  s.input_dim = static_cast<int>(dim);
  s.class_count = train.class_count;
  s.tasks.resize(static_cast<std::size_t>(num_tasks));
  std::vector<int> label_set = detail::sorted_unique_labels(train, test);

  for (int t = 1; t <= num_tasks; ++t) {
    std::vector<std::size_t> perm(dim);
    for (std::size_t i = 0; i < dim; ++i) perm[i] = i;
    if (t > 1) {
      SeededStream rng(seed, "permute", static_cast<std::uint64_t>(t));
      for (std::size_t i = dim - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_below(i + 1));
        std::swap(perm[i], perm[j]);
      }
    }
    TaskDataset& task = s.tasks[static_cast<std::size_t>(t - 1)];
    task.label_set = label_set;
    for (std::size_t i = 0; i < train.size(); ++i)
      detail::append_example(task, t == 1 ? train.xs[i] : permute_vector(train.xs[i], perm),
                             train.ys[i], t, false);
    for (std::size_t i = 0; i < test.size(); ++i)
      detail::append_example(task, t == 1 ? test.xs[i] : permute_vector(test.xs[i], perm),
                             test.ys[i], t, true);
  }
  validate_stream(s);
  return s;
}

namespace detail {

// Inverse-mapped rotation about the grid center with bilinear resampling;
// samples outside the grid read as zero. Angle zero must not reach here.
inline std::vector<double> rotate_image(const std::vector<double>& img, int side,
                                        double angle_degrees) {
  const double pi = 3.14159265358979323846;
  double theta = angle_degrees * pi / 180.0;
  double c = std::cos(theta), sn = std::sin(theta);
  double center = (side - 1) / 2.0;
  std::vector<double> out(img.size(), 0.0);
  auto pixel = [&](int r, int col) -> double {
    if (r < 0 || r >= side || col < 0 || col >= side) return 0.0;
    return img[static_cast<std::size_t>(r * side + col)];
  };
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      double yo = r - center, xo = col - center;
      double ys = c * yo + sn * xo + center;
      double xs = -sn * yo + c * xo + center;
      double y0 = std::floor(ys), x0 = std::floor(xs);
      double fy = ys - y0, fx = xs - x0;
      int iy = static_cast<int>(y0), ix = static_cast<int>(x0);
      double v = (1 - fy) * (1 - fx) * pixel(iy, ix) +
                 (1 - fy) * fx * pixel(iy, ix + 1) +
                 fy * (1 - fx) * pixel(iy + 1, ix) +
                 fy * fx * pixel(iy + 1, ix + 1);
      out[static_cast<std::size_t>(r * side + col)] = v;
    }
  }
  return out;
}

}  // namespace detail

// Domain-incremental stream over square images: task t rotates every input
// by angles_degrees[t-1] about the image center (bilinear). An angle of
// exactly zero copies the data without resampling.
inline TaskStream rotate_2d(const LabeledDataset& train, const LabeledDataset& test,
                            const std::vector<double>& angles_degrees) {
  if (angles_degrees.empty()) throw std::invalid_argument("rotate_2d: no angles");
  if (train.size() == 0) throw std::invalid_argument("rotate_2d: empty dataset");
  int dim = static_cast<int>(train.xs[0].size());
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim)
    throw std::invalid_argument("rotate_2d: inputs must be square grids");

  TaskStream s;
  s.scenario = Scenario::kDomainIncremental;
  s.input_dim = dim;
  s.class_count = train.class_count;
  s.tasks.resize(angles_degrees.size());
  std::vector<int> label_set = detail::sorted_unique_labels(train, test);

  for (std::size_t t = 0; t < angles_degrees.size(); ++t) {
    double angle = angles_degrees[t];
    TaskDataset& task = s.tasks[t];
    task.label_set = label_set;
    int task_id = static_cast<int>(t) + 1;
    auto transform = [&](const std::vector<double>& x) {
      return angle == 0.0 ? x : detail::rotate_image(x, side, angle);
    };
    for (std::size_t i = 0; i < train.size(); ++i)
      detail::append_example(task, transform(train.xs[i]), train.ys[i], task_id, false);
    for (std::size_t i = 0; i < test.size(); ++i)
      detail::append_example(task, transform(test.xs[i]), test.ys[i], task_id, true);
  }
  validate_stream(s);
  return s;
}

namespace detail {

inline std::string read_all_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

inline std::uint32_t idx_u32be(const std::string& in, std::size_t pos,
                               const std::string& path) {
  if (pos + 4 > in.size()) throw IdxTruncatedError("idx header truncated: " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v = (v << 8) | static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i]));
  return v;
}

}  // namespace detail

// MNIST-family IDX ingestion: big-endian headers, pixel bytes scaled to
// [0, 1], labels paired by index. Magic, count, and truncation failures are
// distinct error types so callers can report them precisely.
inline LabeledDataset load_idx(const std::string& images_path,
                               const std::string& labels_path) {
  std::string img = detail::read_all_bytes(images_path);
  std::string lab = detail::read_all_bytes(labels_path);

  if (detail::idx_u32be(img, 0, images_path) != 0x00000803u)
    throw IdxMagicError("bad image magic in " + images_path);
  if (detail::idx_u32be(lab, 0, labels_path) != 0x00000801u)
    throw IdxMagicError("bad label magic in " + labels_path);

  std::uint32_t n_img = detail::idx_u32be(img, 4, images_path);
  std::uint32_t rows = detail::idx_u32be(img, 8, images_path);
  std::uint32_t cols = detail::idx_u32be(img, 12, images_path);
  std::uint32_t n_lab = detail::idx_u32be(lab, 4, labels_path);
  if (n_img != n_lab)
    throw IdxCountError("image/label count mismatch: " + std::to_string(n_img) +
                        " vs " + std::to_string(n_lab));

  std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (img.size() < 16 + static_cast<std::size_t>(n_img) * pixels)
    throw IdxTruncatedError("image payload truncated: " + images_path);
  if (lab.size() < 8 + static_cast<std::size_t>(n_lab))
    throw IdxTruncatedError("label payload truncated: " + labels_path);

  LabeledDataset d;
  int max_label = -1;
  for (std::uint32_t i = 0; i < n_img; ++i) {
    std::vector<double> x(pixels);
    std::size_t base = 16 + static_cast<std::size_t>(i) * pixels;
    for (std::size_t j = 0; j < pixels; ++j)
      x[j] = static_cast<double>(static_cast<unsigned char>(img[base + j])) / 255.0;
    d.xs.push_back(std::move(x));
    int y = static_cast<int>(static_cast<unsigned char>(lab[8 + i]));
    d.ys.push_back(y);
    max_label = std::max(max_label, y);
  }
  d.class_count = max_label + 1;
  return d;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_double_field(const std::string& s, const std::string& context) {
  if (s.empty()) throw CsvFormatError("empty field in " + context);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw CsvFormatError("non-numeric field '" + s + "' in " + context);
  return v;
}

}  // namespace detail

// CSV ingestion with the fixed header contract x0,..,x{d-1},label. Labels
// are non-negative integers; class_count is one past the largest label.
inline LabeledDataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw CsvFormatError("missing header row in " + path);

  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "label")
    throw CsvFormatError("header must end with 'label' in " + path);
  for (std::size_t j = 0; j + 1 < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j))
      throw CsvFormatError("header column " + std::to_string(j) +
                           " must be x" + std::to_string(j) + " in " + path);
  std::size_t dim = header.size() - 1;

  LabeledDataset d;
  int max_label = -1;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    std::string context = path + " row " + std::to_string(row);
    if (fields.size() != dim + 1)
      throw CsvFormatError("expected " + std::to_string(dim + 1) + " fields in " +
                           context);
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j)
      x[j] = detail::parse_double_field(fields[j], context);
    char* end = nullptr;
    long y = std::strtol(fields[dim].c_str(), &end, 10);
    if (fields[dim].empty() || end != fields[dim].c_str() + fields[dim].size() || y < 0)
      throw CsvFormatError("label must be a non-negative integer in " + context);
    d.xs.push_back(std::move(x));
    d.ys.push_back(static_cast<int>(y));
    max_label = std::max(max_label, static_cast<int>(y));
  }
  d.class_count = max_label + 1;
  return d;
}

}  // namespace cop2l
