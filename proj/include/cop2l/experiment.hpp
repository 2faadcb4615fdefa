#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cop2l/baselines.hpp"
#include "cop2l/config.hpp"
#include "cop2l/cop2l.hpp"
#include "cop2l/metrics.hpp"
#include "cop2l/model.hpp"
#include "cop2l/serialize.hpp"
#include "cop2l/svg.hpp"
#include "cop2l/version.hpp"

namespace cop2l {

// Output directory precedence: an explicit --out wins, then the COP2L_OUT
// environment variable, then the config's own [run] out key.
inline std::string resolve_out_dir(const std::string& config_out,
                                   const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("COP2L_OUT"); env != nullptr && *env != '\0')
    return env;
  return config_out;
}

namespace detail {

struct CellOutcome {
  std::string method;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int tasks = 0;
  double average_accuracy = 0.0;
  double forgetting = 0.0;
  double plasticity_value = 0.0;
  double final_bound_mean = 0.0;
  bool has_bounds = false;
};

inline std::map<std::string, std::string> hyperparameter_block(
    const ExperimentConfig& cfg) {
  std::map<std::string, std::string> block;
  for (const auto& line : cfg.canonical_lines()) {
    std::size_t eq = line.find('=');
    block[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return block;
}

inline std::string block_hash(const std::map<std::string, std::string>& block) {
  std::vector<std::string> lines;
  lines.reserve(block.size());
  for (const auto& [key, value] : block) lines.push_back(key + "=" + value);
  return hash_canonical_lines(std::move(lines));
}

// Runs one (method, seed) cell and writes its artifacts under
// <out>/<method>_seed<seed>/. An INCOMPLETE marker file exists for exactly
// as long as the cell has not finished cleanly.
inline CellOutcome run_cell(const ExperimentConfig& cfg, const std::string& method,
                            std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  CellOutcome outcome;
  outcome.method = method;
  outcome.seed = seed;
  fs::path cell = fs::path(out_dir) / (method + "_seed" + std::to_string(seed));
  try {
    fs::create_directories(cell);
    write_text_file((cell / "INCOMPLETE").string(), "cell has not finished\n");

    TaskStream stream = build_stream(cfg.stream, seed);
    LearnerConfig lcfg = cfg.learner;
    lcfg.input_dim = stream.input_dim;
    lcfg.class_count = stream.class_count;
    lcfg.init_seed += seed;
    const std::string version = kEngineVersion;
    const std::string hash = cfg.config_hash();
    outcome.tasks = stream.task_count();

    if (method == "cop2l") {
      CoP2LConfig ccfg = cfg.cop2l;
      ccfg.buffer_seed += seed;
      std::vector<std::unique_ptr<std::ofstream>> traces;
      std::function<std::ostream*(int)> trace_for_task;
      if (cfg.run.mp2l_trace) {
        trace_for_task = [&traces, &cell](int task_id) -> std::ostream* {
          auto path = cell / ("trace_task" + std::to_string(task_id) + ".csv");
          traces.push_back(std::make_unique<std::ofstream>(path, std::ios::binary));
          return traces.back().get();
        };
      }
      CoP2LResult result = cop2l_train(stream, lcfg, ccfg, trace_for_task);
      traces.clear();

      write_text_file((cell / "metrics.csv").string(),
                      metrics_csv_text(version, hash, result.accuracy,
                                       &result.certificates));
      RunRecord rec;
      rec.engine_version = version;
      rec.config_hash = hash;
      rec.method = method;
      rec.seed = seed;
      rec.scenario = scenario_name(stream.scenario);
      rec.hyperparameters = hyperparameter_block(cfg);
      rec.record = result.record;
      rec.params_hash = hex64(parameters_hash(result.params));
      rec.certificates = result.certificates;
      write_text_file((cell / "record.json").string(),
                      run_record_to_json(rec).dump(2) + "\n");
      ordered_json certs;
      certs["engine_version"] = version;
      certs["config_hash"] = hash;
      ordered_json list = ordered_json::array();
      for (const auto& cert : result.certificates)
        list.push_back(certificate_to_json(cert));
      certs["certificates"] = list;
      write_text_file((cell / "certificates.json").string(), certs.dump(2) + "\n");
      save_parameters((cell / "params.bin").string(), result.params, lcfg.init_seed);
      auto rows = parse_metrics_csv(
          metrics_csv_text(version, hash, result.accuracy, &result.certificates));
      write_text_file((cell / "bounds.svg").string(),
                      render_bound_figure(rows, version, hash));

      const int T = stream.task_count();
      outcome.average_accuracy = average_accuracy(result.accuracy, T);
      if (T >= 2) outcome.forgetting = average_forgetting(result.accuracy, T);
      outcome.plasticity_value = plasticity(result.accuracy, T);
      double bound_sum = 0.0;
      int bound_count = 0;
      for (const auto& cert : result.certificates) {
        if (cert.T != T) continue;
        bound_sum += cert.bound;
        ++bound_count;
      }
      outcome.final_bound_mean = bound_sum / static_cast<double>(bound_count);
      outcome.has_bounds = true;
    } else {
      BaselineConfig bcfg;
      bcfg.kind =
          method == "finetune" ? BaselineKind::kFinetune : BaselineKind::kReplay;
      bcfg.buffer_capacity = cfg.cop2l.buffer_capacity;
      bcfg.buffer_seed = cfg.cop2l.buffer_seed + seed;
      BaselineResult result = run_baseline(stream, lcfg, bcfg);
      write_text_file((cell / "metrics.csv").string(),
                      metrics_csv_text(version, hash, result.accuracy, nullptr));
      save_parameters((cell / "params.bin").string(), result.params, lcfg.init_seed);

      const int T = stream.task_count();
      outcome.average_accuracy = average_accuracy(result.accuracy, T);
      if (T >= 2) outcome.forgetting = average_forgetting(result.accuracy, T);
      outcome.plasticity_value = plasticity(result.accuracy, T);
    }

    fs::remove(cell / "INCOMPLETE");
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }
  return outcome;
}

inline void append_summary_rows(std::vector<SummaryRow>& rows,
                                const std::string& method, const std::string& metric,
                                const std::vector<double>& values) {
  SummaryRow row;
  row.method = method;
  row.metric = metric;
  row.runs = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  row.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - row.mean) * (v - row.mean);
    row.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  rows.push_back(row);
}

}  // namespace detail

// Executes every (method, seed) cell of the experiment, `jobs` cells at a
// time, then writes the cross-seed summary. Returns a process exit code:
// zero on full success, one if any cell failed (failed cells keep their
// INCOMPLETE marker and the summary is withheld).
inline int run_experiment(const ExperimentConfig& cfg, int jobs,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  struct Cell {
    std::string method;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& method : cfg.run.methods)
    for (std::uint64_t seed : cfg.run.seeds) cells.push_back({method, seed});

  std::vector<detail::CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      outcomes[i] = detail::run_cell(cfg, cells[i].method, cells[i].seed, out_dir);
      std::lock_guard<std::mutex> lock(log_mutex);
      if (outcomes[i].ok) {
        std::fprintf(stderr, "done: %s seed %llu\n", cells[i].method.c_str(),
                     static_cast<unsigned long long>(cells[i].seed));
      } else {
        std::fprintf(stderr, "FAILED: %s seed %llu: %s\n", cells[i].method.c_str(),
                     static_cast<unsigned long long>(cells[i].seed),
                     outcomes[i].error.c_str());
      }
    }
  };
  int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> threads;
  for (int i = 0; i < thread_count; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  for (const auto& outcome : outcomes)
    if (!outcome.ok) return 1;

  std::vector<SummaryRow> rows;
  for (const auto& method : cfg.run.methods) {
    std::vector<double> acc, forget, plast, bound;
    int tasks = 0;
    bool has_bounds = false;
    for (const auto& outcome : outcomes) {
      if (outcome.method != method) continue;
      tasks = outcome.tasks;
      acc.push_back(outcome.average_accuracy);
      forget.push_back(outcome.forgetting);
      plast.push_back(outcome.plasticity_value);
      bound.push_back(outcome.final_bound_mean);
      has_bounds = outcome.has_bounds;
    }
    detail::append_summary_rows(rows, method, "average_accuracy", acc);
    if (tasks >= 2) detail::append_summary_rows(rows, method, "average_forgetting", forget);
    detail::append_summary_rows(rows, method, "plasticity", plast);
    if (has_bounds) detail::append_summary_rows(rows, method, "final_bound_mean", bound);
  }
  write_text_file((fs::path(out_dir) / "summary.csv").string(),
                  summary_csv_text(kEngineVersion, cfg.config_hash(), rows));
  return 0;
}

namespace detail {

// Rebuilds the typed experiment configuration from a record's hyperparameter
// block by synthesizing the equivalent config text. The block never carries
// [run] keys, so runner defaults apply, which is harmless for verification.
inline ExperimentConfig config_from_block(
    const std::map<std::string, std::string>& block) {
  std::map<std::string, std::vector<std::string>> sections;
  for (const auto& [key, value] : block) {
    std::size_t dot = key.find('.');
    if (dot == std::string::npos)
      throw RecordIncompatibleError("record: hyperparameter key without section: " +
                                    key);
    sections[key.substr(0, dot)].push_back(key.substr(dot + 1) + " = " + value);
  }
  std::string text;
  for (const auto& [section, lines] : sections) {
    text += "[" + section + "]\n";
    for (const auto& line : lines) text += line + "\n";
  }
  return parse_experiment_config(text);
}

}  // namespace detail

// Replays a stored record and checks it against its own claims: the
// hyperparameter block must match the recorded config hash (and the config
// file's, when one is given), and the replayed parameters, index sets, and
// certificates must be bit-identical to the stored ones. Prints a field
// level diff and returns 2 on any mismatch, 0 when everything checks out.
inline int verify_record(const std::string& record_path,
                         const std::string& config_path) {
  RunRecord rec;
  try {
    rec = run_record_from_json(ordered_json::parse(read_text_file(record_path)));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: cannot load record: %s\n", e.what());
    return 1;
  }
  if (rec.method != "cop2l") {
    std::fprintf(stderr, "error: record method '%s' has no compression payload\n",
                 rec.method.c_str());
    return 1;
  }

  int mismatches = 0;
  auto report = [&mismatches](const std::string& field, const std::string& recorded,
                              const std::string& recomputed) {
    std::fprintf(stderr, "mismatch: %s recorded=%s recomputed=%s\n", field.c_str(),
                 recorded.c_str(), recomputed.c_str());
    ++mismatches;
  };

  std::string block_hash = detail::block_hash(rec.hyperparameters);
  if (block_hash != rec.config_hash) {
    report("config_hash", rec.config_hash, block_hash);
    return 2;
  }
  ExperimentConfig cfg;
  try {
    cfg = detail::config_from_block(rec.hyperparameters);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: bad hyperparameter block: %s\n", e.what());
    return 2;
  }
  if (cfg.config_hash() != rec.config_hash) {
    report("config_hash", rec.config_hash, cfg.config_hash());
    return 2;
  }
  if (!config_path.empty()) {
    ExperimentConfig from_file;
    try {
      from_file = load_experiment_config(config_path);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: cannot load config: %s\n", e.what());
      return 1;
    }
    if (from_file.config_hash() != rec.config_hash) {
      report("config_hash(config file)", rec.config_hash, from_file.config_hash());
      return 2;
    }
  }

  ReconstructionResult recon;
  TaskStream stream;
  try {
    stream = build_stream(cfg.stream, rec.seed);
    LearnerConfig lcfg = cfg.learner;
    lcfg.input_dim = stream.input_dim;
    lcfg.class_count = stream.class_count;
    lcfg.init_seed += rec.seed;
    CoP2LConfig ccfg = cfg.cop2l;
    ccfg.buffer_seed += rec.seed;
    recon = reconstruct(stream, lcfg, ccfg, rec.record);
  } catch (const RecordIncompatibleError& e) {
    std::fprintf(stderr, "mismatch: record is not replayable: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: replay failed: %s\n", e.what());
    return 1;
  }

  if (scenario_name(stream.scenario) != rec.scenario)
    report("scenario", rec.scenario, scenario_name(stream.scenario));

  std::string recomputed_params = detail::hex64(parameters_hash(recon.params));
  if (recomputed_params != rec.params_hash)
    report("params_hash", rec.params_hash, recomputed_params);

  for (std::size_t t = 0; t < rec.record.tasks.size(); ++t) {
    const auto& stored = rec.record.tasks[t];
    const auto& rebuilt = recon.rebuilt_tasks[t];
    std::string prefix = "tasks[" + std::to_string(t + 1) + "].";
    if (stored.si != rebuilt.si)
      report(prefix + "si", std::to_string(stored.si.size()) + " entries",
             std::to_string(rebuilt.si.size()) + " entries");
    if (stored.sj != rebuilt.sj)
      report(prefix + "sj", std::to_string(stored.sj.size()) + " entries",
             std::to_string(rebuilt.sj.size()) + " entries");
    if (stored.mu1 != rebuilt.mu1)
      report(prefix + "mu1", std::to_string(stored.mu1.size()) + " entries",
             std::to_string(rebuilt.mu1.size()) + " entries");
  }

  if (rec.certificates.size() != recon.certificates.size()) {
    report("certificates.count", std::to_string(rec.certificates.size()),
           std::to_string(recon.certificates.size()));
  } else {
    for (std::size_t i = 0; i < rec.certificates.size(); ++i) {
      const Certificate& a = rec.certificates[i];
      const Certificate& b = recon.certificates[i];
      std::string prefix = "certificates[" + std::to_string(i) + "].";
      if (a.task_id != b.task_id)
        report(prefix + "task_id", std::to_string(a.task_id),
               std::to_string(b.task_id));
      if (a.T != b.T) report(prefix + "T", std::to_string(a.T), std::to_string(b.T));
      if (a.n_t != b.n_t)
        report(prefix + "n_t", std::to_string(a.n_t), std::to_string(b.n_t));
      if (a.i_size != b.i_size)
        report(prefix + "i_size", std::to_string(a.i_size), std::to_string(b.i_size));
      if (a.j_size != b.j_size)
        report(prefix + "j_size", std::to_string(a.j_size), std::to_string(b.j_size));
      if (a.mu2 != b.mu2)
        report(prefix + "mu2", std::to_string(a.mu2.size()) + " entries",
               std::to_string(b.mu2.size()) + " entries");
      if (a.complement_loss != b.complement_loss)
        report(prefix + "complement_loss", detail::real17(a.complement_loss),
               detail::real17(b.complement_loss));
      if (a.delta != b.delta)
        report(prefix + "delta", detail::real17(a.delta), detail::real17(b.delta));
      if (a.bound != b.bound)
        report(prefix + "bound", detail::real17(a.bound), detail::real17(b.bound));
    }
  }

  if (mismatches > 0) {
    std::fprintf(stderr, "verification failed: %d mismatched field(s)\n", mismatches);
    return 2;
  }
  std::fprintf(stderr, "verified: parameters and certificates replay exactly\n");
  return 0;
}

// Re-renders the bound figure from a metrics table. The engine version and
// config hash are taken from the table's own comment line so the figure
// stays self-describing.
inline int render_figure(const std::string& metrics_path, const std::string& svg_path) {
  try {
    std::string text = read_text_file(metrics_path);
    std::string version = "unknown";
    std::string hash = "unknown";
    std::stringstream ss(text);
    std::string first;
    if (std::getline(ss, first) && first.rfind("# ", 0) == 0) {
      std::stringstream fs(first.substr(2));
      std::string token;
      while (fs >> token) {
        if (token.rfind("engine_version=", 0) == 0) version = token.substr(15);
        if (token.rfind("config_hash=", 0) == 0) hash = token.substr(12);
      }
    }
    auto rows = parse_metrics_csv(text);
    write_text_file(svg_path, render_bound_figure(rows, version, hash));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace cop2l
