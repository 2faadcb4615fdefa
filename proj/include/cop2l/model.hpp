#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cop2l/data.hpp"
#include "cop2l/errors.hpp"
#include "cop2l/rng.hpp"

namespace cop2l {

enum class Architecture { kSoftmax, kMlp };
enum class HeadMode { kSingle, kPerTask };

struct LearnerConfig {
  Architecture architecture = Architecture::kSoftmax;
  int input_dim = 0;
  int class_count = 0;
  int hidden_width = 0;  // mlp only
  double learning_rate = 0.1;
  int epochs_per_update = 1;
  std::uint64_t init_seed = 0;
  HeadMode head_mode = HeadMode::kSingle;
};

struct ParameterLayout {
  Architecture architecture = Architecture::kSoftmax;
  HeadMode head_mode = HeadMode::kSingle;
  int input_dim = 0;
  int class_count = 0;
  int hidden_width = 0;
  int head_count = 1;
  bool operator==(const ParameterLayout&) const = default;
};

struct ParameterVector {
  ParameterLayout layout;
  std::vector<double> values;
};

// Deterministic softmax-regression / one-hidden-layer-ReLU classifier. Every
// operation is a pure function of its arguments: fixed summation order over
// examples sorted by (task_id, global_index), hand-rolled Gaussian init, no
// library RNG distributions. Bit-exact replay depends on this.
class Model {
 public:
  Model(LearnerConfig cfg, std::vector<std::vector<int>> head_classes)
      : cfg_(cfg), head_classes_(std::move(head_classes)) {
    if (cfg_.input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
    if (cfg_.class_count < 1)
      throw std::invalid_argument("model: class_count must be >= 1");
    if (cfg_.architecture == Architecture::kMlp && cfg_.hidden_width < 1)
      throw std::invalid_argument("model: mlp needs hidden_width >= 1");
    if (!(cfg_.learning_rate > 0.0))
      throw std::invalid_argument("model: learning_rate must be positive");
    if (cfg_.epochs_per_update < 1)
      throw std::invalid_argument("model: epochs_per_update must be >= 1");
    if (head_classes_.empty())
      throw std::invalid_argument("model: at least one head required");
    if (cfg_.head_mode == HeadMode::kSingle && head_classes_.size() != 1)
      throw std::invalid_argument("model: single head mode takes exactly one head");
    for (auto& classes : head_classes_) {
      if (classes.empty()) throw std::invalid_argument("model: empty head class set");
      if (!std::is_sorted(classes.begin(), classes.end()))
        throw std::invalid_argument("model: head class sets must be sorted");
      for (int c : classes)
        if (c < 0 || c >= cfg_.class_count)
          throw std::invalid_argument("model: head class id out of range");
    }
    compute_offsets();
  }

  static Model single_head(LearnerConfig cfg) {
    cfg.head_mode = HeadMode::kSingle;
    std::vector<int> all(static_cast<std::size_t>(cfg.class_count));
    for (int c = 0; c < cfg.class_count; ++c) all[static_cast<std::size_t>(c)] = c;
    return Model(cfg, {all});
  }

  static Model per_task(LearnerConfig cfg, std::vector<std::vector<int>> label_sets) {
    cfg.head_mode = HeadMode::kPerTask;
    return Model(cfg, std::move(label_sets));
  }

  const LearnerConfig& config() const { return cfg_; }

  ParameterLayout layout() const {
    ParameterLayout l;
    l.architecture = cfg_.architecture;
    l.head_mode = cfg_.head_mode;
    l.input_dim = cfg_.input_dim;
    l.class_count = cfg_.class_count;
    l.hidden_width = cfg_.architecture == Architecture::kMlp ? cfg_.hidden_width : 0;
    l.head_count = static_cast<int>(head_classes_.size());
    return l;
  }

  std::size_t parameter_count() const { return total_params_; }

  // Gaussian weights scaled by 1/sqrt(fan_in), zero biases, one dedicated
  // stream so results depend only on (config, init_seed).
  ParameterVector init_params() const {
    SeededStream rng(cfg_.init_seed, "init");
    ParameterVector pv;
    pv.layout = layout();
    pv.values.assign(total_params_, 0.0);
    if (cfg_.architecture == Architecture::kSoftmax) {
      double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.input_dim));
      for (std::size_t h = 0; h < head_classes_.size(); ++h) {
        std::size_t off = head_offsets_[h];
        std::size_t weights = head_classes_[h].size() * static_cast<std::size_t>(cfg_.input_dim);
        for (std::size_t i = 0; i < weights; ++i) pv.values[off + i] = rng.gaussian() * scale;
      }
    } else {
      double s1 = 1.0 / std::sqrt(static_cast<double>(cfg_.input_dim));
      std::size_t w1 = static_cast<std::size_t>(cfg_.hidden_width) *
                       static_cast<std::size_t>(cfg_.input_dim);
      for (std::size_t i = 0; i < w1; ++i) pv.values[i] = rng.gaussian() * s1;
      double s2 = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_width));
      for (std::size_t h = 0; h < head_classes_.size(); ++h) {
        std::size_t off = head_offsets_[h];
        std::size_t weights =
            head_classes_[h].size() * static_cast<std::size_t>(cfg_.hidden_width);
        for (std::size_t i = 0; i < weights; ++i) pv.values[off + i] = rng.gaussian() * s2;
      }
    }
    return pv;
  }

  // epochs_per_update full-batch gradient steps on the weight-scaled mean
  // cross-entropy, examples summed in ascending (task_id, global_index).
  ParameterVector update(const ParameterVector& theta,
                         const std::vector<WeightedExample>& examples) const {
    if (examples.empty()) throw std::invalid_argument("update: empty example list");
    check_params(theta);
    for (const auto& e : examples) check_example(e);
    ParameterVector out = theta;
    for (int epoch = 0; epoch < cfg_.epochs_per_update; ++epoch) {
      std::vector<double> grad = batch_gradient(out, examples);
      for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] -= cfg_.learning_rate * grad[i];
    }
    return out;
  }

  // Gradient of (1/N) * sum_i w_i * CE_i. The probability clamp guards only
  // reported loss values; the objective differentiated here is the plain
  // cross-entropy, which is what the selection threshold semantics assume.
  std::vector<double> batch_gradient(const ParameterVector& theta,
                                     const std::vector<WeightedExample>& examples) const {
    check_params(theta);
    std::vector<const WeightedExample*> order;
    order.reserve(examples.size());
    for (const auto& e : examples) order.push_back(&e);
    std::sort(order.begin(), order.end(),
              [](const WeightedExample* a, const WeightedExample* b) {
                return example_id_less(*a, *b);
              });
    std::vector<double> grad(total_params_, 0.0);
    std::vector<double> hidden, z, probs;
    for (const WeightedExample* e : order) {
      check_example(*e);
      std::size_t h = head_index(e->task_id);
      if (cfg_.architecture == Architecture::kSoftmax) {
        forward_softmax(theta, e->x, h, probs);
        accumulate_softmax_grad(theta, *e, h, probs, grad);
      } else {
        forward_mlp(theta, e->x, h, z, hidden, probs);
        accumulate_mlp_grad(theta, *e, h, z, hidden, probs, grad);
      }
    }
    double inv_n = 1.0 / static_cast<double>(examples.size());
    for (double& g : grad) g *= inv_n;
    return grad;
  }

  // Clamped cross-entropy -ln p(y|x), p in [1e-12, 1]; per-task heads route
  // by the example's task_id.
  double ce_loss(const ParameterVector& theta, const WeightedExample& e) const {
    check_params(theta);
    check_example(e);
    std::size_t h = head_index(e.task_id);
    double logp = log_prob_of_label(theta, e.x, e.y, h);
    double loss = -logp;
    const double cap = -std::log(1e-12);
    if (loss > cap) loss = cap;
    if (loss < 0.0) loss = 0.0;
    return loss;
  }

  int zero_one(const ParameterVector& theta, const WeightedExample& e) const {
    check_params(theta);
    check_example(e);
    std::size_t h = head_index(e.task_id);
    return predict_head(theta, e.x, h) == e.y ? 0 : 1;
  }

  // task_id is required (and used) only in per-task head mode.
  int predict(const ParameterVector& theta, const std::vector<double>& x,
              int task_id = 0) const {
    check_params(theta);
    if (static_cast<int>(x.size()) != cfg_.input_dim)
      throw std::invalid_argument("predict: input dimension mismatch");
    std::size_t h = 0;
    if (cfg_.head_mode == HeadMode::kPerTask) {
      if (task_id < 1)
        throw std::invalid_argument("predict: task_id required for per-task heads");
      h = head_index(task_id);
    }
    return predict_head(theta, x, h);
  }

  // Value-index range [first, second) of one head's parameters (testing aid).
  std::pair<std::size_t, std::size_t> head_parameter_range(int task_id) const {
    std::size_t h = head_index(cfg_.head_mode == HeadMode::kPerTask ? task_id : 0);
    std::size_t per_class = cfg_.architecture == Architecture::kSoftmax
                                ? static_cast<std::size_t>(cfg_.input_dim) + 1
                                : static_cast<std::size_t>(cfg_.hidden_width) + 1;
    return {head_offsets_[h], head_offsets_[h] + head_classes_[h].size() * per_class};
  }

 private:
  void compute_offsets() {
    std::size_t off = 0;
    if (cfg_.architecture == Architecture::kMlp) {
      off += static_cast<std::size_t>(cfg_.hidden_width) *
                 static_cast<std::size_t>(cfg_.input_dim) +
             static_cast<std::size_t>(cfg_.hidden_width);
    }
    std::size_t fan = cfg_.architecture == Architecture::kSoftmax
                          ? static_cast<std::size_t>(cfg_.input_dim)
                          : static_cast<std::size_t>(cfg_.hidden_width);
    head_offsets_.clear();
    for (const auto& classes : head_classes_) {
      head_offsets_.push_back(off);
      off += classes.size() * fan + classes.size();
    }
    total_params_ = off;
  }

  void check_params(const ParameterVector& theta) const {
    if (!(theta.layout == layout()) || theta.values.size() != total_params_)
      throw std::invalid_argument("model: parameter vector does not match this model");
  }

  void check_example(const WeightedExample& e) const {
    if (static_cast<int>(e.x.size()) != cfg_.input_dim)
      throw std::invalid_argument("model: example dimension mismatch");
  }

  std::size_t head_index(int task_id) const {
    if (cfg_.head_mode == HeadMode::kSingle) return 0;
    if (task_id < 1 || static_cast<std::size_t>(task_id) > head_classes_.size())
      throw std::invalid_argument("model: task_id outside head range");
    return static_cast<std::size_t>(task_id - 1);
  }

  int slot_of(std::size_t head, int y) const {
    const auto& classes = head_classes_[head];
    auto it = std::lower_bound(classes.begin(), classes.end(), y);
    if (it == classes.end() || *it != y)
      throw std::invalid_argument("model: label not covered by the example's head");
    return static_cast<int>(it - classes.begin());
  }

  // Scores for one head; softmax path.
  void scores_softmax(const ParameterVector& theta, const std::vector<double>& x,
                      std::size_t head, std::vector<double>& scores) const {
    const auto& classes = head_classes_[head];
    std::size_t off = head_offsets_[head];
    std::size_t dim = static_cast<std::size_t>(cfg_.input_dim);
    std::size_t bias = off + classes.size() * dim;
    scores.assign(classes.size(), 0.0);
    for (std::size_t a = 0; a < classes.size(); ++a) {
      double s = 0.0;
      const double* w = theta.values.data() + off + a * dim;
      for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
      scores[a] = s + theta.values[bias + a];
    }
  }

  void scores_mlp(const ParameterVector& theta, const std::vector<double>& x,
                  std::size_t head, std::vector<double>& z, std::vector<double>& hidden,
                  std::vector<double>& scores) const {
    std::size_t dim = static_cast<std::size_t>(cfg_.input_dim);
    std::size_t hw = static_cast<std::size_t>(cfg_.hidden_width);
    z.assign(hw, 0.0);
    hidden.assign(hw, 0.0);
    for (std::size_t j = 0; j < hw; ++j) {
      double s = 0.0;
      const double* w = theta.values.data() + j * dim;
      for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
      s += theta.values[hw * dim + j];
      z[j] = s;
      hidden[j] = s > 0.0 ? s : 0.0;
    }
    const auto& classes = head_classes_[head];
    std::size_t off = head_offsets_[head];
    std::size_t bias = off + classes.size() * hw;
    scores.assign(classes.size(), 0.0);
    for (std::size_t a = 0; a < classes.size(); ++a) {
      double s = 0.0;
      const double* w = theta.values.data() + off + a * hw;
      for (std::size_t j = 0; j < hw; ++j) s += w[j] * hidden[j];
      scores[a] = s + theta.values[bias + a];
    }
  }

  static void softmax_in_place(std::vector<double>& scores) {
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    for (double& s : scores) s /= z;
  }

  void forward_softmax(const ParameterVector& theta, const std::vector<double>& x,
                       std::size_t head, std::vector<double>& probs) const {
    scores_softmax(theta, x, head, probs);
    softmax_in_place(probs);
  }

  void forward_mlp(const ParameterVector& theta, const std::vector<double>& x,
                   std::size_t head, std::vector<double>& z, std::vector<double>& hidden,
                   std::vector<double>& probs) const {
    scores_mlp(theta, x, head, z, hidden, probs);
    softmax_in_place(probs);
  }

  double log_prob_of_label(const ParameterVector& theta, const std::vector<double>& x,
                           int y, std::size_t head) const {
    std::vector<double> scores, z, hidden;
    if (cfg_.architecture == Architecture::kSoftmax) {
      scores_softmax(theta, x, head, scores);
    } else {
      scores_mlp(theta, x, head, z, hidden, scores);
    }
    int slot = slot_of(head, y);
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double lse = 0.0;
    for (double s : scores) lse += std::exp(s - mx);
    return scores[static_cast<std::size_t>(slot)] - mx - std::log(lse);
  }

  int predict_head(const ParameterVector& theta, const std::vector<double>& x,
                   std::size_t head) const {
    std::vector<double> scores, z, hidden;
    if (cfg_.architecture == Architecture::kSoftmax) {
      scores_softmax(theta, x, head, scores);
    } else {
      scores_mlp(theta, x, head, z, hidden, scores);
    }
    std::size_t best = 0;
    for (std::size_t a = 1; a < scores.size(); ++a)
      if (scores[a] > scores[best]) best = a;  // strict: first max = smallest class
    return head_classes_[head][best];
  }

  void accumulate_softmax_grad(const ParameterVector& theta, const WeightedExample& e,
                               std::size_t head, std::vector<double>& probs,
                               std::vector<double>& grad) const {
    const auto& classes = head_classes_[head];
    std::size_t off = head_offsets_[head];
    std::size_t dim = static_cast<std::size_t>(cfg_.input_dim);
    std::size_t bias = off + classes.size() * dim;
    int slot = slot_of(head, e.y);
    for (std::size_t a = 0; a < classes.size(); ++a) {
      double ds = e.w * (probs[a] - (static_cast<int>(a) == slot ? 1.0 : 0.0));
      double* gw = grad.data() + off + a * dim;
      for (std::size_t d = 0; d < dim; ++d) gw[d] += ds * e.x[d];
      grad[bias + a] += ds;
    }
    (void)theta;
  }

  void accumulate_mlp_grad(const ParameterVector& theta, const WeightedExample& e,
                           std::size_t head, const std::vector<double>& z,
                           const std::vector<double>& hidden, std::vector<double>& probs,
                           std::vector<double>& grad) const {
    const auto& classes = head_classes_[head];
    std::size_t dim = static_cast<std::size_t>(cfg_.input_dim);
    std::size_t hw = static_cast<std::size_t>(cfg_.hidden_width);
    std::size_t off = head_offsets_[head];
    std::size_t bias = off + classes.size() * hw;
    int slot = slot_of(head, e.y);
    std::vector<double> dh(hw, 0.0);
    for (std::size_t a = 0; a < classes.size(); ++a) {
      double ds = e.w * (probs[a] - (static_cast<int>(a) == slot ? 1.0 : 0.0));
      double* gw = grad.data() + off + a * hw;
      const double* w = theta.values.data() + off + a * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        gw[j] += ds * hidden[j];
        dh[j] += ds * w[j];
      }
      grad[bias + a] += ds;
    }
    for (std::size_t j = 0; j < hw; ++j) {
      if (z[j] <= 0.0) continue;  // relu gate
      double* gw = grad.data() + j * dim;
      for (std::size_t d = 0; d < dim; ++d) gw[d] += dh[j] * e.x[d];
      grad[hw * dim + j] += dh[j];
    }
  }

  LearnerConfig cfg_;
  std::vector<std::vector<int>> head_classes_;
  std::vector<std::size_t> head_offsets_;
  std::size_t total_params_ = 0;
};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32le(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw IoError("parameter file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

inline std::uint64_t get_u64le(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw IoError("parameter file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace detail

inline constexpr char kParameterMagic[9] = "COP2LPRM";

// Checkpoint format: 8-byte magic, then little-endian u32 fields (version,
// architecture, head mode, input_dim, class_count, hidden_width, head_count),
// u64 init_seed, u64 value count, raw little-endian f64 array. Bit-exact.
inline void save_parameters(const std::string& path, const ParameterVector& pv,
                            std::uint64_t init_seed) {
  std::string out;
  out.append(kParameterMagic, 8);
  detail::put_u32le(out, 1);
  detail::put_u32le(out, pv.layout.architecture == Architecture::kSoftmax ? 0 : 1);
  detail::put_u32le(out, pv.layout.head_mode == HeadMode::kSingle ? 0 : 1);
  detail::put_u32le(out, static_cast<std::uint32_t>(pv.layout.input_dim));
  detail::put_u32le(out, static_cast<std::uint32_t>(pv.layout.class_count));
  detail::put_u32le(out, static_cast<std::uint32_t>(pv.layout.hidden_width));
  detail::put_u32le(out, static_cast<std::uint32_t>(pv.layout.head_count));
  detail::put_u64le(out, init_seed);
  detail::put_u64le(out, static_cast<std::uint64_t>(pv.values.size()));
  for (double v : pv.values) detail::put_u64le(out, std::bit_cast<std::uint64_t>(v));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline std::pair<ParameterVector, std::uint64_t> load_parameters(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 8 || in.compare(0, 8, kParameterMagic, 8) != 0)
    throw IoError("not a parameter checkpoint: " + path);
  std::size_t pos = 8;
  std::uint32_t version = detail::get_u32le(in, pos);
  if (version != 1) throw IoError("unsupported checkpoint version");
  ParameterVector pv;
  pv.layout.architecture =
      detail::get_u32le(in, pos) == 0 ? Architecture::kSoftmax : Architecture::kMlp;
  pv.layout.head_mode =
      detail::get_u32le(in, pos) == 0 ? HeadMode::kSingle : HeadMode::kPerTask;
  pv.layout.input_dim = static_cast<int>(detail::get_u32le(in, pos));
  pv.layout.class_count = static_cast<int>(detail::get_u32le(in, pos));
  pv.layout.hidden_width = static_cast<int>(detail::get_u32le(in, pos));
  pv.layout.head_count = static_cast<int>(detail::get_u32le(in, pos));
  std::uint64_t seed = detail::get_u64le(in, pos);
  std::uint64_t count = detail::get_u64le(in, pos);
  pv.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i)
    pv.values[i] = std::bit_cast<double>(detail::get_u64le(in, pos));
  return {std::move(pv), seed};
}

// 64-bit content hash of a parameter vector (layout + little-endian values).
inline std::uint64_t parameters_hash(const ParameterVector& pv) {
  std::string bytes;
  detail::put_u32le(bytes, pv.layout.architecture == Architecture::kSoftmax ? 0 : 1);
  detail::put_u32le(bytes, pv.layout.head_mode == HeadMode::kSingle ? 0 : 1);
  detail::put_u32le(bytes, static_cast<std::uint32_t>(pv.layout.input_dim));
  detail::put_u32le(bytes, static_cast<std::uint32_t>(pv.layout.class_count));
  detail::put_u32le(bytes, static_cast<std::uint32_t>(pv.layout.hidden_width));
  detail::put_u32le(bytes, static_cast<std::uint32_t>(pv.layout.head_count));
  for (double v : pv.values) detail::put_u64le(bytes, std::bit_cast<std::uint64_t>(v));
  return fnv1a64(bytes);
}

}  // namespace cop2l
