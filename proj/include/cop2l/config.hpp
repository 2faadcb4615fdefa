#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cop2l/cop2l.hpp"
#include "cop2l/data.hpp"
#include "cop2l/errors.hpp"
#include "cop2l/model.hpp"
#include "cop2l/rng.hpp"
#include "cop2l/tasks.hpp"

namespace cop2l {

enum class StreamKind {
  kBlobs,
  kSplitIdx,
  kSplitCsv,
  kPermuteIdx,
  kPermuteCsv,
  kRotateIdx,
};

inline std::string stream_kind_name(StreamKind kind) {
  switch (kind) {
    case StreamKind::kBlobs: return "blobs";
    case StreamKind::kSplitIdx: return "split_idx";
    case StreamKind::kSplitCsv: return "split_csv";
    case StreamKind::kPermuteIdx: return "permute_idx";
    case StreamKind::kPermuteCsv: return "permute_csv";
    case StreamKind::kRotateIdx: return "rotate_idx";
  }
  throw std::logic_error("stream_kind_name: unknown kind");
}

inline StreamKind stream_kind_from_name(const std::string& name) {
  if (name == "blobs") return StreamKind::kBlobs;
  if (name == "split_idx") return StreamKind::kSplitIdx;
  if (name == "split_csv") return StreamKind::kSplitCsv;
  if (name == "permute_idx") return StreamKind::kPermuteIdx;
  if (name == "permute_csv") return StreamKind::kPermuteCsv;
  if (name == "rotate_idx") return StreamKind::kRotateIdx;
  throw ConfigError("stream.kind: unknown kind '" + name + "'");
}

// Declarative description of how to build a task stream. The base `seed` is
// offset by the per-run seed where the kind draws randomness, so seed lists
// vary the data while one cell stays exactly reproducible.
struct StreamSpec {
  StreamKind kind = StreamKind::kBlobs;
  Scenario scenario = Scenario::kClassIncremental;
  int tasks = 0;
  int classes_per_task = 0;
  int train_per_class = 0;
  int test_per_class = 0;
  int dim = 0;
  double separation = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool shuffled_class_order = false;
  std::string images, labels, test_images, test_labels;
  std::string csv, test_csv;
  std::vector<double> angles;
};

struct RunSpec {
  std::vector<std::string> methods = {"cop2l"};
  std::vector<std::uint64_t> seeds = {1};
  std::string out = "out";
  bool mp2l_trace = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty element in list '" + value + "'");
    parts.push_back(item);
  }
  if (parts.empty()) throw ConfigError("empty list");
  return parts;
}

inline long long parse_int(const std::string& where, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw ConfigError(where + ": '" + value + "' is not an integer");
  return v;
}

inline std::uint64_t parse_uint(const std::string& where, const std::string& value) {
  if (!value.empty() && value[0] == '-')
    throw ConfigError(where + ": '" + value + "' is negative");
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw ConfigError(where + ": '" + value + "' is not an unsigned integer");
  return v;
}

inline double parse_real(const std::string& where, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw ConfigError(where + ": '" + value + "' is not a number");
  return v;
}

inline bool parse_flag(const std::string& where, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError(where + ": '" + value + "' is not true/false");
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One hashing rule for canonical "section.key=value" lines, shared by the
// config and by record hyperparameter blocks so the two can never drift.
inline std::string hash_canonical_lines(std::vector<std::string> lines) {
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& line : lines) {
    h = fnv1a64(line, h);
    h = fnv1a64("\n", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Raw INI scan: sections of key=value lines, '#' full-line comments. Repeated
// keys and repeated sections are rejected outright rather than silently
// merged, so a config always means one thing.
inline std::map<std::string, std::map<std::string, std::string>> parse_ini(
    const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string line;
  std::string current;
  std::stringstream ss(text);
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      if (sections.count(current) != 0)
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" +
                          current + "]");
      sections[current];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (current.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key outside a section");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" +
                        key + "'");
    if (!sections[current].emplace(key, value).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key +
                        "' in [" + current + "]");
  }
  return sections;
}

// Typed view of one section that tracks which keys were consumed; anything
// left over at the end is a config error, which catches typos early.
class KeyReader {
 public:
  KeyReader(std::string section, const std::map<std::string, std::string>& entries)
      : section_(std::move(section)), entries_(entries) {}

  std::optional<std::string> take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string require(const std::string& key) {
    auto v = take(key);
    if (!v.has_value())
      throw ConfigError(section_ + "." + key + ": required key is missing");
    return *v;
  }

  std::string where(const std::string& key) const { return section_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : entries_)
      if (used_.count(key) == 0)
        throw ConfigError(section_ + "." + key + ": unknown key");
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>& entries_;
  std::set<std::string> used_;
};

}  // namespace detail

// Fully resolved experiment description. The config hash covers the stream,
// learner, and continual-loop sections (the parts that define a run's
// mathematics); orchestration keys in [run] stay out of it so the same
// experiment keeps its hash across seed lists and output locations.
struct ExperimentConfig {
  StreamSpec stream;
  LearnerConfig learner;
  CoP2LConfig cop2l;
  RunSpec run;

  std::vector<std::string> canonical_lines() const {
    std::vector<std::string> lines;
    auto add = [&lines](const std::string& key, const std::string& value) {
      lines.push_back(key + "=" + value);
    };
    add("stream.kind", stream_kind_name(stream.kind));
    add("stream.scenario", scenario_name(stream.scenario));
    add("stream.seed", std::to_string(stream.seed));
    add("stream.train_per_class", std::to_string(stream.train_per_class));
    add("stream.test_per_class", std::to_string(stream.test_per_class));
    switch (stream.kind) {
      case StreamKind::kBlobs:
        add("stream.tasks", std::to_string(stream.tasks));
        add("stream.classes_per_task", std::to_string(stream.classes_per_task));
        add("stream.dim", std::to_string(stream.dim));
        add("stream.separation", detail::format_real(stream.separation));
        add("stream.noise", detail::format_real(stream.noise));
        break;
      case StreamKind::kSplitIdx:
      case StreamKind::kSplitCsv:
        add("stream.classes_per_task", std::to_string(stream.classes_per_task));
        add("stream.class_order",
            stream.shuffled_class_order ? "shuffled" : "identity");
        break;
      case StreamKind::kPermuteIdx:
      case StreamKind::kPermuteCsv:
        add("stream.tasks", std::to_string(stream.tasks));
        break;
      case StreamKind::kRotateIdx: {
        std::string joined;
        for (std::size_t i = 0; i < stream.angles.size(); ++i) {
          if (i > 0) joined += ",";
          joined += detail::format_real(stream.angles[i]);
        }
        add("stream.angles", joined);
        break;
      }
    }
    if (stream.kind == StreamKind::kSplitIdx || stream.kind == StreamKind::kPermuteIdx ||
        stream.kind == StreamKind::kRotateIdx) {
      add("stream.images", stream.images);
      add("stream.labels", stream.labels);
      add("stream.test_images", stream.test_images);
      add("stream.test_labels", stream.test_labels);
    }
    if (stream.kind == StreamKind::kSplitCsv || stream.kind == StreamKind::kPermuteCsv) {
      add("stream.csv", stream.csv);
      add("stream.test_csv", stream.test_csv);
    }

    add("learner.architecture",
        learner.architecture == Architecture::kSoftmax ? "softmax" : "mlp");
    add("learner.hidden_width", std::to_string(learner.hidden_width));
    add("learner.learning_rate", detail::format_real(learner.learning_rate));
    add("learner.epochs", std::to_string(learner.epochs_per_update));
    add("learner.init_seed", std::to_string(learner.init_seed));

    add("cop2l.gamma", detail::format_real(cop2l.gamma));
    add("cop2l.omega", detail::format_real(cop2l.omega));
    add("cop2l.buffer_capacity", std::to_string(cop2l.buffer_capacity));
    add("cop2l.block_size", std::to_string(cop2l.block_size));
    add("cop2l.delta", detail::format_real(cop2l.delta));
    add("cop2l.early_stopping", cop2l.early_stopping ? "true" : "false");
    add("cop2l.max_iterations",
        cop2l.max_iterations == std::numeric_limits<std::uint64_t>::max()
            ? "0"
            : std::to_string(cop2l.max_iterations));
    add("cop2l.buffer_seed", std::to_string(cop2l.buffer_seed));

    std::sort(lines.begin(), lines.end());
    return lines;
  }

  std::string config_hash() const {
    return detail::hash_canonical_lines(canonical_lines());
  }
};

namespace detail {

inline StreamSpec resolve_stream(const std::map<std::string, std::string>& entries) {
  KeyReader keys("stream", entries);
  StreamSpec spec;
  spec.kind = stream_kind_from_name(keys.require("kind"));

  const bool split = spec.kind == StreamKind::kSplitIdx ||
                     spec.kind == StreamKind::kSplitCsv;
  const bool permute = spec.kind == StreamKind::kPermuteIdx ||
                       spec.kind == StreamKind::kPermuteCsv;
  const bool rotate = spec.kind == StreamKind::kRotateIdx;
  const bool idx_paths = spec.kind == StreamKind::kSplitIdx ||
                         spec.kind == StreamKind::kPermuteIdx || rotate;
  const bool csv_paths = spec.kind == StreamKind::kSplitCsv ||
                         spec.kind == StreamKind::kPermuteCsv;

  if (permute || rotate) {
    spec.scenario = Scenario::kDomainIncremental;
    if (auto v = keys.take("scenario"); v.has_value() && *v != "domain_incremental")
      throw ConfigError("stream.scenario: this kind is domain incremental");
  } else {
    spec.scenario = Scenario::kClassIncremental;
    if (auto v = keys.take("scenario")) {
      spec.scenario = scenario_from_name(*v);
      if (spec.scenario == Scenario::kDomainIncremental)
        throw ConfigError("stream.scenario: this kind cannot be domain incremental");
    }
  }

  if (auto v = keys.take("seed")) spec.seed = parse_uint(keys.where("seed"), *v);

  if (spec.kind == StreamKind::kBlobs) {
    spec.tasks = static_cast<int>(parse_int(keys.where("tasks"), keys.require("tasks")));
    spec.classes_per_task = static_cast<int>(
        parse_int(keys.where("classes_per_task"), keys.require("classes_per_task")));
    spec.train_per_class = static_cast<int>(
        parse_int(keys.where("train_per_class"), keys.require("train_per_class")));
    spec.test_per_class = static_cast<int>(
        parse_int(keys.where("test_per_class"), keys.require("test_per_class")));
    spec.dim = static_cast<int>(parse_int(keys.where("dim"), keys.require("dim")));
    spec.separation = parse_real(keys.where("separation"), keys.require("separation"));
    spec.noise = parse_real(keys.where("noise"), keys.require("noise"));
    if (spec.tasks < 1 || spec.classes_per_task < 1 || spec.train_per_class < 1 ||
        spec.dim < 1)
      throw ConfigError("stream: blob counts must be positive");
    if (spec.test_per_class < 0)
      throw ConfigError("stream.test_per_class: must be >= 0");
    if (spec.separation < 0.0) throw ConfigError("stream.separation: must be >= 0");
    if (!(spec.noise > 0.0)) throw ConfigError("stream.noise: must be positive");
  }
  if (split) {
    spec.classes_per_task = static_cast<int>(
        parse_int(keys.where("classes_per_task"), keys.require("classes_per_task")));
    if (spec.classes_per_task < 1)
      throw ConfigError("stream.classes_per_task: must be >= 1");
    if (auto v = keys.take("class_order")) {
      if (*v == "shuffled") {
        spec.shuffled_class_order = true;
      } else if (*v != "identity") {
        throw ConfigError("stream.class_order: expected identity or shuffled");
      }
    }
  }
  if (permute) {
    spec.tasks = static_cast<int>(parse_int(keys.where("tasks"), keys.require("tasks")));
    if (spec.tasks < 1) throw ConfigError("stream.tasks: must be >= 1");
  }
  if (rotate) {
    for (const auto& item : split_list(keys.require("angles")))
      spec.angles.push_back(parse_real(keys.where("angles"), item));
  }
  if (split || permute || rotate) {
    if (auto v = keys.take("train_per_class")) {
      spec.train_per_class = static_cast<int>(parse_int(keys.where("train_per_class"), *v));
      if (spec.train_per_class < 0)
        throw ConfigError("stream.train_per_class: must be >= 0");
    }
    if (auto v = keys.take("test_per_class")) {
      spec.test_per_class = static_cast<int>(parse_int(keys.where("test_per_class"), *v));
      if (spec.test_per_class < 0)
        throw ConfigError("stream.test_per_class: must be >= 0");
    }
  }
  if (idx_paths) {
    spec.images = keys.require("images");
    spec.labels = keys.require("labels");
    spec.test_images = keys.require("test_images");
    spec.test_labels = keys.require("test_labels");
  }
  if (csv_paths) {
    spec.csv = keys.require("csv");
    spec.test_csv = keys.require("test_csv");
  }
  keys.finish();
  return spec;
}

inline LearnerConfig resolve_learner(const std::map<std::string, std::string>& entries) {
  KeyReader keys("learner", entries);
  LearnerConfig cfg;
  std::string arch = keys.require("architecture");
  if (arch == "softmax") {
    cfg.architecture = Architecture::kSoftmax;
    cfg.hidden_width = 0;
    if (auto v = keys.take("hidden_width");
        v.has_value() && parse_int(keys.where("hidden_width"), *v) != 0)
      throw ConfigError("learner.hidden_width: softmax takes no hidden layer");
  } else if (arch == "mlp") {
    cfg.architecture = Architecture::kMlp;
    cfg.hidden_width = static_cast<int>(
        parse_int(keys.where("hidden_width"), keys.require("hidden_width")));
    if (cfg.hidden_width < 1)
      throw ConfigError("learner.hidden_width: must be >= 1 for mlp");
  } else {
    throw ConfigError("learner.architecture: expected softmax or mlp");
  }
  if (auto v = keys.take("learning_rate")) {
    cfg.learning_rate = parse_real(keys.where("learning_rate"), *v);
    if (!(cfg.learning_rate > 0.0))
      throw ConfigError("learner.learning_rate: must be positive");
  }
  if (auto v = keys.take("epochs")) {
    cfg.epochs_per_update = static_cast<int>(parse_int(keys.where("epochs"), *v));
    if (cfg.epochs_per_update < 1) throw ConfigError("learner.epochs: must be >= 1");
  }
  if (auto v = keys.take("init_seed"))
    cfg.init_seed = parse_uint(keys.where("init_seed"), *v);
  keys.finish();
  return cfg;
}

inline CoP2LConfig resolve_cop2l(const std::map<std::string, std::string>& entries) {
  KeyReader keys("cop2l", entries);
  CoP2LConfig cfg;
  if (auto v = keys.take("gamma")) {
    cfg.gamma = parse_real(keys.where("gamma"), *v);
    if (!(cfg.gamma > 0.0)) throw ConfigError("cop2l.gamma: must be positive");
  }
  if (auto v = keys.take("omega")) {
    cfg.omega = parse_real(keys.where("omega"), *v);
    if (!(cfg.omega >= 1.0)) throw ConfigError("cop2l.omega: must be >= 1");
  }
  if (auto v = keys.take("buffer_capacity"))
    cfg.buffer_capacity = parse_uint(keys.where("buffer_capacity"), *v);
  if (auto v = keys.take("block_size")) {
    cfg.block_size = static_cast<int>(parse_int(keys.where("block_size"), *v));
    if (cfg.block_size < 1) throw ConfigError("cop2l.block_size: must be >= 1");
  }
  if (auto v = keys.take("delta")) {
    cfg.delta = parse_real(keys.where("delta"), *v);
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
      throw ConfigError("cop2l.delta: must be in (0, 1)");
  }
  if (auto v = keys.take("early_stopping"))
    cfg.early_stopping = parse_flag(keys.where("early_stopping"), *v);
  if (auto v = keys.take("max_iterations")) {
    std::uint64_t raw = parse_uint(keys.where("max_iterations"), *v);
    cfg.max_iterations =
        raw == 0 ? std::numeric_limits<std::uint64_t>::max() : raw;
  }
  if (auto v = keys.take("buffer_seed"))
    cfg.buffer_seed = parse_uint(keys.where("buffer_seed"), *v);
  keys.finish();
  return cfg;
}

inline RunSpec resolve_run(const std::map<std::string, std::string>& entries) {
  KeyReader keys("run", entries);
  RunSpec spec;
  if (auto v = keys.take("methods")) {
    spec.methods = split_list(*v);
    std::set<std::string> seen;
    for (const auto& m : spec.methods) {
      if (m != "cop2l" && m != "finetune" && m != "replay")
        throw ConfigError("run.methods: unknown method '" + m + "'");
      if (!seen.insert(m).second)
        throw ConfigError("run.methods: duplicate method '" + m + "'");
    }
  }
  if (auto v = keys.take("seeds")) {
    spec.seeds.clear();
    std::set<std::uint64_t> seen;
    for (const auto& item : split_list(*v)) {
      std::uint64_t s = parse_uint(keys.where("seeds"), item);
      if (!seen.insert(s).second)
        throw ConfigError("run.seeds: duplicate seed " + item);
      spec.seeds.push_back(s);
    }
  }
  if (auto v = keys.take("out")) spec.out = *v;
  if (auto v = keys.take("mp2l_trace"))
    spec.mp2l_trace = parse_flag(keys.where("mp2l_trace"), *v);
  keys.finish();
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  auto sections = detail::parse_ini(text);
  static const std::map<std::string, std::string> kEmpty;
  for (const auto& [name, entries] : sections)
    if (name != "stream" && name != "learner" && name != "cop2l" && name != "run")
      throw ConfigError("unknown section [" + name + "]");
  if (sections.count("stream") == 0) throw ConfigError("missing [stream] section");
  if (sections.count("learner") == 0) throw ConfigError("missing [learner] section");

  ExperimentConfig cfg;
  cfg.stream = detail::resolve_stream(sections.at("stream"));
  cfg.learner = detail::resolve_learner(sections.at("learner"));
  cfg.cop2l = detail::resolve_cop2l(sections.count("cop2l") ? sections.at("cop2l")
                                                            : kEmpty);
  cfg.run = detail::resolve_run(sections.count("run") ? sections.at("run") : kEmpty);
  for (const auto& m : cfg.run.methods)
    if (m == "replay" && cfg.cop2l.buffer_capacity < 1)
      throw ConfigError("run.methods: replay needs cop2l.buffer_capacity >= 1");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

namespace detail {

// Deterministic per-class head subsample, keeping original dataset order.
// A cap of zero keeps everything.
inline LabeledDataset subsample_per_class(const LabeledDataset& data, int per_class) {
  if (per_class <= 0) return data;
  LabeledDataset out;
  out.class_count = data.class_count;
  std::vector<int> taken(static_cast<std::size_t>(data.class_count), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    int y = data.ys[i];
    if (taken[static_cast<std::size_t>(y)] >= per_class) continue;
    ++taken[static_cast<std::size_t>(y)];
    out.xs.push_back(data.xs[i]);
    out.ys.push_back(data.ys[i]);
  }
  return out;
}

}  // namespace detail

// Materializes the task stream for one run cell. `run_seed` offsets the base
// data seed wherever the kind consumes randomness, so different seeds see
// different draws while replays of the same cell are exact.
inline TaskStream build_stream(const StreamSpec& spec, std::uint64_t run_seed) {
  const std::uint64_t seed = spec.seed + run_seed;
  switch (spec.kind) {
    case StreamKind::kBlobs:
      return synthetic_blobs(spec.tasks, spec.classes_per_task, spec.train_per_class,
                             spec.test_per_class, spec.dim, spec.separation,
                             spec.noise, seed, spec.scenario);
    case StreamKind::kSplitIdx:
    case StreamKind::kSplitCsv: {
      LabeledDataset train, test;
      if (spec.kind == StreamKind::kSplitIdx) {
        train = load_idx(spec.images, spec.labels);
        test = load_idx(spec.test_images, spec.test_labels);
      } else {
        train = load_csv(spec.csv);
        test = load_csv(spec.test_csv);
      }
      train = detail::subsample_per_class(train, spec.train_per_class);
      test = detail::subsample_per_class(test, spec.test_per_class);
      std::optional<std::uint64_t> order_seed;
      if (spec.shuffled_class_order) order_seed = seed;
      return split_by_class(train, test, spec.classes_per_task, order_seed,
                            spec.scenario);
    }
    case StreamKind::kPermuteIdx:
    case StreamKind::kPermuteCsv: {
      LabeledDataset train, test;
      if (spec.kind == StreamKind::kPermuteIdx) {
        train = load_idx(spec.images, spec.labels);
        test = load_idx(spec.test_images, spec.test_labels);
      } else {
        train = load_csv(spec.csv);
        test = load_csv(spec.test_csv);
      }
      train = detail::subsample_per_class(train, spec.train_per_class);
      test = detail::subsample_per_class(test, spec.test_per_class);
      return permute_features(train, test, spec.tasks, seed);
    }
    case StreamKind::kRotateIdx: {
      LabeledDataset train = load_idx(spec.images, spec.labels);
      LabeledDataset test = load_idx(spec.test_images, spec.test_labels);
      train = detail::subsample_per_class(train, spec.train_per_class);
      test = detail::subsample_per_class(test, spec.test_per_class);
      return rotate_2d(train, test, spec.angles);
    }
  }
  throw std::logic_error("build_stream: unknown kind");
}

}  // namespace cop2l
